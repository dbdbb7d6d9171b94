#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wsfl {

/// Dense row-major tensor of doubles. Rank is arbitrary but almost all of
/// the pipeline works with scalars, vectors (1×n) and matrices.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(numel(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (numel(shape_) != data_.size())
      throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  static Tensor full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  bool empty() const { return data_.empty(); }

  // 2-D accessors; a rank-1 tensor is treated as a single row.
  std::size_t rows() const { return rank() >= 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    if (rank() >= 2) return shape_[1];
    return rank() == 1 ? shape_[0] : 1;
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double item() const {
    if (size() != 1) throw std::logic_error("Tensor::item: size != 1");
    return data_[0];
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static std::size_t numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

namespace detail {

// c(n×m) += a(n×k) · b(k×m)
inline void gemm_acc(const double* a, std::size_t n, std::size_t k,
                     const double* b, std::size_t m, double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c(n×m) += a(n×k) · b(m×k)^T
inline void gemm_nt_acc(const double* a, std::size_t n, std::size_t k,
                        const double* b, std::size_t m, double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// c(k×m) += a(n×k)^T · b(n×m)
inline void gemm_tn_acc(const double* a, std::size_t n, std::size_t k,
                        const double* b, std::size_t m, double* c) {
  for (std::size_t p = 0; p < n; ++p) {
    const double* ap = a + p * k;
    const double* bp = b + p * m;
    for (std::size_t i = 0; i < k; ++i) {
      const double api = ap[i];
      if (api == 0.0) continue;
      double* ci = c + i * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace detail

inline Tensor matmul_values(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
  Tensor c({a.rows(), b.cols()});
  detail::gemm_acc(a.data().data(), a.rows(), a.cols(), b.data().data(), b.cols(),
                   c.data().data());
  return c;
}

}  // namespace wsfl
