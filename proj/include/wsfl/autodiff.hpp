#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "wsfl/tensor.hpp"

namespace wsfl::ad {

// Define-by-run reverse-mode engine. Every op allocates one Node; backward()
// walks the recorded graph once in reverse topological order. A node may be
// back-propagated through only once per recording.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool has_grad = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void accumulate(const Tensor& g) {
    if (!has_grad) {
      grad = Tensor(value.shape());
      has_grad = true;
    }
    auto& gd = grad.data();
    const auto& sd = g.data();
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += sd[i];
  }
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  bool defined() const { return n_ != nullptr; }
  const Tensor& value() const { return n_->value; }
  bool requires_grad() const { return n_->requires_grad; }
  bool has_grad() const { return n_->has_grad; }
  const Tensor& grad() const {
    if (!n_->has_grad) throw std::logic_error("Var: no gradient recorded");
    return n_->grad;
  }
  const NodePtr& node() const { return n_; }

 private:
  NodePtr n_;
};

namespace detail {

inline Var make_op(Tensor value, std::initializer_list<Var> parents,
                   std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents) {
    n->parents.push_back(p.node());
    n->requires_grad = n->requires_grad || p.node()->requires_grad;
  }
  if (n->requires_grad) n->backprop = std::move(backprop);
  return Var(std::move(n));
}

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto& bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return detail::make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad);
    if (pb->requires_grad) pb->accumulate(self.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto& bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return detail::make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad);
    if (pb->requires_grad) {
      Tensor g = self.grad;
      for (auto& v : g.data()) v = -v;
      pb->accumulate(g);
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto& bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return detail::make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    if (pa->requires_grad) {
      Tensor g = self.grad;
      const auto& bv = pb->value.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= bv[i];
      pa->accumulate(g);
    }
    if (pb->requires_grad) {
      Tensor g = self.grad;
      const auto& av = pa->value.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= av[i];
      pb->accumulate(g);
    }
  });
}

inline Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= c;
  return detail::make_op(std::move(out), {a}, [pa = a.node(), c](Node& self) {
    Tensor g = self.grad;
    for (auto& v : g.data()) v *= c;
    pa->accumulate(g);
  });
}

inline Var matmul(const Var& a, const Var& b) {
  Tensor out = matmul_values(a.value(), b.value());
  return detail::make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    const Tensor& g = self.grad;
    if (pa->requires_grad) {
      Tensor ga(pa->value.shape());
      wsfl::detail::gemm_nt_acc(g.data().data(), g.rows(), g.cols(),
                                pb->value.data().data(), pb->value.rows(),
                                ga.data().data());
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Tensor gb(pb->value.shape());
      wsfl::detail::gemm_tn_acc(pa->value.data().data(), pa->value.rows(), pa->value.cols(),
                                g.data().data(), g.cols(), gb.data().data());
      pb->accumulate(gb);
    }
  });
}

// a · b^T, with a: n×k, b: m×k.
inline Var matmul_nt(const Var& a, const Var& b) {
  if (a.value().cols() != b.value().cols())
    throw std::invalid_argument("matmul_nt: inner dims differ");
  Tensor out({a.value().rows(), b.value().rows()});
  wsfl::detail::gemm_nt_acc(a.value().data().data(), a.value().rows(), a.value().cols(),
                            b.value().data().data(), b.value().rows(), out.data().data());
  return detail::make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    const Tensor& g = self.grad;  // n×m
    if (pa->requires_grad) {
      Tensor ga(pa->value.shape());  // n×k += g · b
      wsfl::detail::gemm_acc(g.data().data(), g.rows(), g.cols(),
                             pb->value.data().data(), pb->value.cols(), ga.data().data());
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Tensor gb(pb->value.shape());  // m×k += g^T · a
      wsfl::detail::gemm_tn_acc(g.data().data(), g.rows(), g.cols(),
                                pa->value.data().data(), pa->value.cols(),
                                gb.data().data());
      pb->accumulate(gb);
    }
  });
}

// Broadcast-add a 1×m row vector to every row of a n×m matrix.
inline Var add_rowvec(const Var& a, const Var& b) {
  if (a.value().cols() != b.value().cols() || b.value().rows() != 1)
    throw std::invalid_argument("add_rowvec: expects n×m and 1×m");
  Tensor out = a.value();
  const auto& bd = b.value().data();
  const std::size_t m = out.cols();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) += bd[j];
  return detail::make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad);
    if (pb->requires_grad) {
      Tensor gb(pb->value.shape());
      const std::size_t m = self.grad.cols();
      for (std::size_t i = 0; i < self.grad.rows(); ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += self.grad(i, j);
      pb->accumulate(gb);
    }
  });
}

inline Var relu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return detail::make_op(std::move(out), {a}, [pa = a.node()](Node& self) {
    Tensor g = self.grad;
    const auto& in = pa->value.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in[i] <= 0.0) g[i] = 0.0;
    pa->accumulate(g);
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  Tensor saved = out;
  return detail::make_op(std::move(out), {a}, [pa = a.node(), s = std::move(saved)](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s[i] * (1.0 - s[i]);
    pa->accumulate(g);
  });
}

inline Var tanh(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = std::tanh(v);
  Tensor saved = out;
  return detail::make_op(std::move(out), {a}, [pa = a.node(), t = std::move(saved)](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - t[i] * t[i];
    pa->accumulate(g);
  });
}

inline Var softmax_rows(const Var& a) {
  Tensor out = a.value();
  const std::size_t n = out.rows(), m = out.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = out(i, 0);
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, out(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += (out(i, j) = std::exp(out(i, j) - mx));
    for (std::size_t j = 0; j < m; ++j) out(i, j) /= z;
  }
  Tensor saved = out;
  return detail::make_op(std::move(out), {a}, [pa = a.node(), y = std::move(saved)](Node& self) {
    const std::size_t n = y.rows(), m = y.cols();
    Tensor g(y.shape());
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < m; ++j) g(i, j) = (self.grad(i, j) - dot) * y(i, j);
    }
    pa->accumulate(g);
  });
}

inline Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return detail::make_op(Tensor::scalar(s), {a}, [pa = a.node()](Node& self) {
    pa->accumulate(Tensor::full(pa->value.shape(), self.grad[0]));
  });
}

inline Var mean_all(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return detail::make_op(Tensor::scalar(s / n), {a}, [pa = a.node(), n](Node& self) {
    pa->accumulate(Tensor::full(pa->value.shape(), self.grad[0] / n));
  });
}

// Column-wise mean over rows: n×m -> 1×m.
inline Var mean_rows(const Var& a) {
  const std::size_t n = a.value().rows(), m = a.value().cols();
  Tensor out({1, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += a.value()(i, j);
  for (std::size_t j = 0; j < m; ++j) out[j] /= static_cast<double>(n);
  return detail::make_op(std::move(out), {a}, [pa = a.node(), n, m](Node& self) {
    Tensor g({n, m});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) g(i, j) = self.grad[j] / static_cast<double>(n);
    pa->accumulate(g);
  });
}

// Rows [r0, r1) of a matrix.
inline Var slice_rows(const Var& a, std::size_t r0, std::size_t r1) {
  const std::size_t m = a.value().cols();
  if (r0 >= r1 || r1 > a.value().rows())
    throw std::invalid_argument("slice_rows: bad range");
  Tensor out({r1 - r0, m});
  std::copy(a.value().data().begin() + r0 * m, a.value().data().begin() + r1 * m,
            out.data().begin());
  return detail::make_op(std::move(out), {a}, [pa = a.node(), r0, m](Node& self) {
    Tensor g(pa->value.shape());
    std::copy(self.grad.data().begin(), self.grad.data().end(),
              g.data().begin() + r0 * m);
    pa->accumulate(g);
  });
}

inline Var concat_rows(const Var& a, const Var& b) {
  if (a.value().cols() != b.value().cols())
    throw std::invalid_argument("concat_rows: column mismatch");
  const std::size_t m = a.value().cols();
  Tensor out({a.value().rows() + b.value().rows(), m});
  std::copy(a.value().data().begin(), a.value().data().end(), out.data().begin());
  std::copy(b.value().data().begin(), b.value().data().end(),
            out.data().begin() + a.value().size());
  const std::size_t na = a.value().size();
  return detail::make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node(), na](Node& self) {
    if (pa->requires_grad) {
      Tensor ga(pa->value.shape());
      std::copy(self.grad.data().begin(), self.grad.data().begin() + na,
                ga.data().begin());
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Tensor gb(pb->value.shape());
      std::copy(self.grad.data().begin() + na, self.grad.data().end(),
                gb.data().begin());
      pb->accumulate(gb);
    }
  });
}

// Inverted dropout; identity in eval mode so the deployed path is the plain net.
inline Var dropout(const Var& a, double p, bool train, std::mt19937_64& rng) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  Tensor mask(a.value().shape());
  const double inv = 1.0 / (1.0 - p);
  for (auto& v : mask.data()) v = keep(rng) ? inv : 0.0;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return detail::make_op(std::move(out), {a}, [pa = a.node(), m = std::move(mask)](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m[i];
    pa->accumulate(g);
  });
}

// Mean binary cross-entropy on logits, numerically stable.
inline Var bce_with_logits(const Var& logits, const Tensor& targets) {
  if (!logits.value().same_shape(targets))
    throw std::invalid_argument("bce_with_logits: shape mismatch");
  const auto& z = logits.value().data();
  const auto& y = targets.data();
  const double n = static_cast<double>(z.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    loss += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  return detail::make_op(Tensor::scalar(loss / n), {logits},
                         [pl = logits.node(), t = targets, n](Node& self) {
                           Tensor g(pl->value.shape());
                           const auto& zv = pl->value.data();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const double s = 1.0 / (1.0 + std::exp(-zv[i]));
                             g[i] = self.grad[0] * (s - t[i]) / n;
                           }
                           pl->accumulate(g);
                         });
}

inline void backward(const Var& loss) {
  if (loss.value().size() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  NodePtr root = loss.node();
  if (root->consumed) throw std::logic_error("backward: tape already consumed");

  // Iterative post-order DFS for a reverse topological order.
  std::vector<NodePtr> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<NodePtr, std::size_t>> stack{{root, 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      NodePtr next = node->parents[idx++];
      if (next->requires_grad && visited.insert(next.get()).second)
        stack.emplace_back(std::move(next), 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (const auto& n : order)
    if (n->backprop && n->consumed)
      throw std::logic_error("backward: tape already consumed");

  root->accumulate(Tensor::scalar(1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = **it;
    if (n.backprop) {
      if (n.has_grad) n.backprop(n);
      n.consumed = true;
    }
  }
}

}  // namespace wsfl::ad
