#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsfl/autodiff.hpp"
#include "wsfl/preprocess.hpp"
#include "wsfl/tensor.hpp"

namespace wsfl {

inline constexpr const char* kCheckpointSchemaVersion = "1";

struct TrainConfig {
  double learning_rate = 1e-3;
  double dropout = 0.2;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 5;
  std::uint64_t seed = 0;
  double val_fraction = 0.15;
  bool allow_off_grid = false;

  void validate() const {
    if (max_epochs == 0 || batch_size == 0)
      throw std::invalid_argument("TrainConfig: max_epochs and batch_size must be positive");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
      throw std::invalid_argument("TrainConfig: val_fraction outside [0,1)");
    if (allow_off_grid) return;
    auto in = [](double v, std::initializer_list<double> grid) {
      for (double g : grid)
        if (v == g) return true;
      return false;
    };
    if (!in(learning_rate, {1e-3, 1e-4, 1e-5}))
      throw std::invalid_argument("TrainConfig: learning_rate off the {1e-3,1e-4,1e-5} grid");
    if (!in(dropout, {0.2, 0.3}))
      throw std::invalid_argument("TrainConfig: dropout off the {0.2,0.3} grid");
    if (batch_size != 16 && batch_size != 32)
      throw std::invalid_argument("TrainConfig: batch_size off the {16,32} grid");
  }
};

inline double cosine_lr(double base, std::size_t epoch, std::size_t max_epochs) {
  return base * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                      static_cast<double>(max_epochs)));
}

struct Param {
  std::string name;
  Tensor value;
};

namespace init {

inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out,
                             std::vector<std::size_t> shape, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

}  // namespace init

inline std::vector<ad::Var> bind_params(const std::vector<Param>& params, bool requires_grad) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(ad::Var::leaf(p.value, requires_grad));
  return vars;
}

// ---------------------------------------------------------------------------
// Video-level classifiers (Model A)

struct VideoModelConfig {
  std::string variant = "temporal_attention";  // or "recurrent_baseline"
  std::size_t input_dim = 99;
  std::size_t max_len = 150;
  std::size_t hidden = 192;     // recurrent baseline
  std::size_t embed_dim = 16;   // temporal attention
  std::uint64_t init_seed = 0;
};

/// Many-to-one sequence classifier emitting one logit per sequence.
class VideoClassifier {
 public:
  virtual ~VideoClassifier() = default;

  const VideoModelConfig& config() const { return cfg_; }
  const std::string& variant() const { return cfg_.variant; }
  std::size_t input_dim() const { return cfg_.input_dim; }
  std::size_t max_len() const { return cfg_.max_len; }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  /// Logit for one sequence. `x` holds at least `true_len` valid rows;
  /// anything past `true_len` is padding and must not influence the result.
  virtual ad::Var logit(const std::vector<ad::Var>& p, const ad::Var& x,
                        std::size_t true_len, bool train, double dropout_p,
                        std::mt19937_64& rng) const = 0;

  double predict_prob(const FeatureSequence& f) const {
    if (f.dim() != cfg_.input_dim)
      throw std::invalid_argument("VideoClassifier: feature dimension mismatch");
    auto p = bind_params(params_, false);
    auto x = ad::Var::leaf(f.features, false);
    std::mt19937_64 rng(0);
    ad::Var l = logit(p, x, f.length(), false, 0.0, rng);
    return 1.0 / (1.0 + std::exp(-l.value().item()));
  }

  int predict_label(const FeatureSequence& f, double decision_threshold = 0.5) const {
    return predict_prob(f) > decision_threshold ? 1 : 0;
  }

 protected:
  explicit VideoClassifier(VideoModelConfig cfg) : cfg_(std::move(cfg)) {}
  VideoModelConfig cfg_;
  std::vector<Param> params_;
};

/// Gated recurrent baseline: single layer, hidden size 192 by default.
class RecurrentBaseline final : public VideoClassifier {
 public:
  explicit RecurrentBaseline(VideoModelConfig cfg) : VideoClassifier(std::move(cfg)) {
    std::mt19937_64 rng(cfg_.init_seed);
    const std::size_t d = cfg_.input_dim, h = cfg_.hidden;
    for (const char* gate : {"update", "reset", "candidate"}) {
      params_.push_back({std::string("w_") + gate,
                         init::glorot_uniform(d, h, {d, h}, rng)});
      params_.push_back({std::string("u_") + gate,
                         init::glorot_uniform(h, h, {h, h}, rng)});
      params_.push_back({std::string("b_") + gate, Tensor({1, h})});
    }
    params_.push_back({"w_out", init::glorot_uniform(h, 1, {h, 1}, rng)});
    params_.push_back({"b_out", Tensor({1, 1})});
  }

  ad::Var logit(const std::vector<ad::Var>& p, const ad::Var& x, std::size_t true_len,
                bool train, double dropout_p, std::mt19937_64& rng) const override {
    const auto& wz = p[0]; const auto& uz = p[1]; const auto& bz = p[2];
    const auto& wr = p[3]; const auto& ur = p[4]; const auto& br = p[5];
    const auto& wh = p[6]; const auto& uh = p[7]; const auto& bh = p[8];
    const auto& wo = p[9]; const auto& bo = p[10];
    ad::Var h = ad::Var::leaf(Tensor({1, cfg_.hidden}), false);
    for (std::size_t t = 0; t < true_len; ++t) {
      ad::Var xt = ad::slice_rows(x, t, t + 1);
      ad::Var z = ad::sigmoid(ad::add(ad::add(ad::matmul(xt, wz), ad::matmul(h, uz)), bz));
      ad::Var r = ad::sigmoid(ad::add(ad::add(ad::matmul(xt, wr), ad::matmul(h, ur)), br));
      ad::Var cand = ad::tanh(
          ad::add(ad::add(ad::matmul(xt, wh), ad::matmul(ad::mul(r, h), uh)), bh));
      h = ad::add(h, ad::mul(z, ad::sub(cand, h)));
    }
    h = ad::dropout(h, dropout_p, train, rng);
    return ad::add(ad::matmul(h, wo), bo);
  }
};

namespace detail_models {

inline Tensor sinusoidal_position_encoding(std::size_t max_len, std::size_t dim) {
  Tensor pe({max_len, dim});
  for (std::size_t t = 0; t < max_len; ++t)
    for (std::size_t i = 0; i < dim; ++i) {
      const double angle = static_cast<double>(t) /
                           std::pow(10000.0, 2.0 * static_cast<double>(i / 2) /
                                                 static_cast<double>(dim));
      pe(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

}  // namespace detail_models

/// Lightweight temporal-attention classifier: linear frame embedding with
/// sinusoidal position encodings, one head of scaled dot-product
/// self-attention over valid frames, mean pooling, linear head.
class TemporalAttention final : public VideoClassifier {
 public:
  explicit TemporalAttention(VideoModelConfig cfg)
      : VideoClassifier(std::move(cfg)),
        pos_enc_(detail_models::sinusoidal_position_encoding(cfg_.max_len, cfg_.embed_dim)) {
    std::mt19937_64 rng(cfg_.init_seed);
    const std::size_t d = cfg_.input_dim, e = cfg_.embed_dim;
    params_.push_back({"w_embed", init::glorot_uniform(d, e, {d, e}, rng)});
    params_.push_back({"b_embed", Tensor({1, e})});
    params_.push_back({"w_query", init::glorot_uniform(e, e, {e, e}, rng)});
    params_.push_back({"w_key", init::glorot_uniform(e, e, {e, e}, rng)});
    params_.push_back({"w_value", init::glorot_uniform(e, e, {e, e}, rng)});
    params_.push_back({"w_out", init::glorot_uniform(e, 1, {e, 1}, rng)});
    params_.push_back({"b_out", Tensor({1, 1})});
  }

  ad::Var logit(const std::vector<ad::Var>& p, const ad::Var& x, std::size_t true_len,
                bool train, double dropout_p, std::mt19937_64& rng) const override {
    if (true_len == 0 || true_len > x.value().rows())
      throw std::invalid_argument("TemporalAttention: bad true_len");
    if (true_len > pos_enc_.rows())
      throw std::invalid_argument("TemporalAttention: sequence longer than max_len");
    const auto& we = p[0]; const auto& be = p[1];
    const auto& wq = p[2]; const auto& wk = p[3]; const auto& wv = p[4];
    const auto& wo = p[5]; const auto& bo = p[6];
    // Padded rows are dropped up front, which is what masks them out of the
    // attention weights and the pooled mean.
    ad::Var xt = x.value().rows() == true_len ? x : ad::slice_rows(x, 0, true_len);
    Tensor pe({true_len, cfg_.embed_dim});
    std::copy(pos_enc_.data().begin(),
              pos_enc_.data().begin() + true_len * cfg_.embed_dim, pe.data().begin());
    ad::Var h = ad::add(ad::add_rowvec(ad::matmul(xt, we), be),
                        ad::Var::leaf(std::move(pe), false));
    h = ad::dropout(h, dropout_p, train, rng);
    ad::Var q = ad::matmul(h, wq);
    ad::Var k = ad::matmul(h, wk);
    ad::Var v = ad::matmul(h, wv);
    ad::Var attn = ad::softmax_rows(
        ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim))));
    ad::Var pooled = ad::mean_rows(ad::matmul(attn, v));
    pooled = ad::dropout(pooled, dropout_p, train, rng);
    return ad::add(ad::matmul(pooled, wo), bo);
  }

 private:
  Tensor pos_enc_;
};

inline std::unique_ptr<VideoClassifier> make_video_classifier(const VideoModelConfig& cfg) {
  if (cfg.variant == "recurrent_baseline")
    return std::make_unique<RecurrentBaseline>(cfg);
  if (cfg.variant == "temporal_attention")
    return std::make_unique<TemporalAttention>(cfg);
  throw std::invalid_argument("unknown video classifier variant: " + cfg.variant);
}

// ---------------------------------------------------------------------------
// Frame-level MLP (Model B)

struct FrameModelConfig {
  std::size_t input_dim = 99;
  std::vector<std::size_t> hidden_units = {64};  // 1 or 2 entries
  std::uint64_t init_seed = 0;
  bool allow_off_grid = false;

  void validate() const {
    if (hidden_units.empty() || hidden_units.size() > 2)
      throw std::invalid_argument("FrameModelConfig: one or two hidden layers required");
    if (allow_off_grid) return;
    for (std::size_t h : hidden_units) {
      static const std::size_t grid[] = {32, 48, 64, 96, 128, 192, 256};
      if (std::find(std::begin(grid), std::end(grid), h) == std::end(grid))
        throw std::invalid_argument("FrameModelConfig: hidden size off the allowed grid");
    }
  }
};

class FrameClassifier {
 public:
  explicit FrameClassifier(FrameModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.init_seed);
    std::size_t prev = cfg_.input_dim;
    for (std::size_t i = 0; i < cfg_.hidden_units.size(); ++i) {
      const std::size_t h = cfg_.hidden_units[i];
      params_.push_back({"w" + std::to_string(i + 1),
                         init::glorot_uniform(prev, h, {prev, h}, rng)});
      params_.push_back({"b" + std::to_string(i + 1), Tensor({1, h})});
      prev = h;
    }
    params_.push_back({"w_out", init::glorot_uniform(prev, 1, {prev, 1}, rng)});
    params_.push_back({"b_out", Tensor({1, 1})});
  }

  const FrameModelConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return cfg_.input_dim; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  /// Logits for a batch of frames, x: B×D -> B×1.
  ad::Var logits(const std::vector<ad::Var>& p, const ad::Var& x, bool train,
                 double dropout_p, std::mt19937_64& rng) const {
    ad::Var h = x;
    std::size_t pi = 0;
    for (std::size_t layer = 0; layer < cfg_.hidden_units.size(); ++layer) {
      h = ad::relu(ad::add_rowvec(ad::matmul(h, p[pi]), p[pi + 1]));
      h = ad::dropout(h, dropout_p, train, rng);
      pi += 2;
    }
    return ad::add_rowvec(ad::matmul(h, p[pi]), p[pi + 1]);
  }

  /// Eval-mode probabilities for a batch of frames.
  std::vector<double> predict_probs(const Tensor& frames) const {
    if (frames.cols() != cfg_.input_dim)
      throw std::invalid_argument("FrameClassifier: feature dimension mismatch");
    auto p = bind_params(params_, false);
    std::mt19937_64 rng(0);
    ad::Var l = logits(p, ad::Var::leaf(frames, false), false, 0.0, rng);
    std::vector<double> probs(l.value().rows());
    for (std::size_t i = 0; i < probs.size(); ++i)
      probs[i] = 1.0 / (1.0 + std::exp(-l.value()(i, 0)));
    return probs;
  }

  double predict_prob(const std::vector<double>& frame) const {
    return predict_probs(Tensor({1, frame.size()}, frame)).front();
  }

 private:
  FrameModelConfig cfg_;
  std::vector<Param> params_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  bool diverged = false;
  std::size_t diverged_epoch = 0;
};

namespace detail_models {

class Adam {
 public:
  Adam(std::vector<Param>& params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.shape());
      v_.emplace_back(p.value.shape());
    }
  }

  void step(const std::vector<ad::Var>& leaves, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!leaves[i].has_grad()) continue;
      const auto& g = leaves[i].grad().data();
      auto& m = m_[i].data();
      auto& v = v_[i].data();
      auto& w = params_[i].value.data();
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
        v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
        w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
      }
    }
  }

 private:
  std::vector<Param>& params_;
  double beta1_, beta2_, eps_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

inline std::vector<Tensor> snapshot(const std::vector<Param>& params) {
  std::vector<Tensor> s;
  s.reserve(params.size());
  for (const auto& p : params) s.push_back(p.value);
  return s;
}

inline void restore(std::vector<Param>& params, const std::vector<Tensor>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = snap[i];
}

// Stratified train/validation index split; validation may be empty.
inline void stratified_split(const std::vector<int>& labels, double val_fraction,
                             std::mt19937_64& rng, std::vector<std::size_t>& train_idx,
                             std::vector<std::size_t>& val_idx) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1].push_back(i);
  for (auto& cls : by_class) {
    std::shuffle(cls.begin(), cls.end(), rng);
    const std::size_t n_val = static_cast<std::size_t>(
        std::floor(val_fraction * static_cast<double>(cls.size())));
    for (std::size_t i = 0; i < cls.size(); ++i)
      (i < n_val ? val_idx : train_idx).push_back(cls[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

// Shared epoch loop: early stopping on validation loss (train loss when no
// validation samples exist), best-epoch snapshot restore, cosine schedule.
template <typename EpochFn, typename EvalFn>
TrainReport run_epochs(std::vector<Param>& params, const TrainConfig& cfg,
                       EpochFn train_one_epoch, EvalFn val_loss_fn, bool has_val) {
  TrainReport report;
  Adam adam(params);
  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params = snapshot(params);
  std::size_t non_improving = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cosine_lr(cfg.learning_rate, epoch, cfg.max_epochs);
    const double train_loss = train_one_epoch(adam, lr);
    report.train_loss.push_back(train_loss);
    if (!std::isfinite(train_loss)) {
      report.diverged = true;
      report.diverged_epoch = epoch;
      report.epochs_run = epoch + 1;
      break;
    }
    const double monitored = has_val ? val_loss_fn() : train_loss;
    report.val_loss.push_back(monitored);
    report.epochs_run = epoch + 1;
    if (monitored < best) {
      best = monitored;
      report.best_epoch = epoch;
      best_params = snapshot(params);
      non_improving = 0;
    } else if (++non_improving > cfg.early_stop_patience) {
      break;
    }
  }
  restore(params, best_params);
  if (report.diverged)
    throw std::runtime_error("training diverged at epoch " +
                             std::to_string(report.diverged_epoch));
  return report;
}

}  // namespace detail_models

inline TrainReport train_video_classifier(VideoClassifier& model,
                                          const std::vector<FeatureSequence>& features,
                                          const std::vector<int>& labels,
                                          const TrainConfig& cfg) {
  cfg.validate();
  if (features.empty() || features.size() != labels.size())
    throw std::invalid_argument("train_video_classifier: empty or mismatched training set");
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> train_idx, val_idx;
  detail_models::stratified_split(labels, cfg.val_fraction, rng, train_idx, val_idx);
  if (train_idx.empty()) train_idx = val_idx;

  auto sample_loss = [&](const std::vector<ad::Var>& p, std::size_t i, bool train) {
    const auto& f = features[i];
    ad::Var x = ad::Var::leaf(f.features, false);
    ad::Var l = model.logit(p, x, f.length(), train, cfg.dropout, rng);
    return ad::bce_with_logits(l, Tensor({1, 1}, {static_cast<double>(labels[i])}));
  };

  auto train_one_epoch = [&](detail_models::Adam& adam, double lr) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, train_idx.size());
      auto p = bind_params(model.params(), true);
      ad::Var loss = sample_loss(p, train_idx[start], true);
      for (std::size_t i = start + 1; i < end; ++i)
        loss = ad::add(loss, sample_loss(p, train_idx[i], true));
      loss = ad::scale(loss, 1.0 / static_cast<double>(end - start));
      ad::backward(loss);
      adam.step(p, lr);
      epoch_loss += loss.value().item() * static_cast<double>(end - start);
    }
    return epoch_loss / static_cast<double>(train_idx.size());
  };

  auto val_loss_fn = [&]() {
    auto p = bind_params(model.params(), false);
    double total = 0.0;
    for (std::size_t i : val_idx) total += sample_loss(p, i, false).value().item();
    return total / static_cast<double>(val_idx.size());
  };

  return detail_models::run_epochs(model.params(), cfg, train_one_epoch, val_loss_fn,
                                   !val_idx.empty());
}

inline TrainReport train_frame_classifier(FrameClassifier& model, const Tensor& frames,
                                          const std::vector<int>& labels,
                                          const TrainConfig& cfg) {
  cfg.validate();
  if (frames.rows() == 0 || frames.rows() != labels.size())
    throw std::invalid_argument("train_frame_classifier: empty or mismatched training set");
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> train_idx, val_idx;
  detail_models::stratified_split(labels, cfg.val_fraction, rng, train_idx, val_idx);
  if (train_idx.empty()) train_idx = val_idx;
  const std::size_t d = frames.cols();

  auto gather = [&](const std::vector<std::size_t>& idx, std::size_t start, std::size_t end,
                    Tensor& x, Tensor& y) {
    x = Tensor({end - start, d});
    y = Tensor({end - start, 1});
    for (std::size_t i = start; i < end; ++i) {
      std::copy(frames.data().begin() + idx[i] * d, frames.data().begin() + (idx[i] + 1) * d,
                x.data().begin() + (i - start) * d);
      y[i - start] = static_cast<double>(labels[idx[i]]);
    }
  };

  auto train_one_epoch = [&](detail_models::Adam& adam, double lr) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, train_idx.size());
      Tensor x, y;
      gather(train_idx, start, end, x, y);
      auto p = bind_params(model.params(), true);
      ad::Var loss = ad::bce_with_logits(
          model.logits(p, ad::Var::leaf(std::move(x), false), true, cfg.dropout, rng), y);
      ad::backward(loss);
      adam.step(p, lr);
      epoch_loss += loss.value().item() * static_cast<double>(end - start);
    }
    return epoch_loss / static_cast<double>(train_idx.size());
  };

  auto val_loss_fn = [&]() {
    Tensor x, y;
    gather(val_idx, 0, val_idx.size(), x, y);
    auto p = bind_params(model.params(), false);
    std::mt19937_64 eval_rng(0);
    return ad::bce_with_logits(
               model.logits(p, ad::Var::leaf(std::move(x), false), false, 0.0, eval_rng), y)
        .value()
        .item();
  };

  return detail_models::run_epochs(model.params(), cfg, train_one_epoch, val_loss_fn,
                                   !val_idx.empty());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace detail_models {

inline nlohmann::json params_to_json(const std::vector<Param>& params) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : params)
    arr.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"data", p.value.data()}});
  return arr;
}

inline void params_from_json(const nlohmann::json& arr, std::vector<Param>& params) {
  if (arr.size() != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& rec = arr.at(i);
    if (rec.at("name").get<std::string>() != params[i].name)
      throw std::runtime_error("checkpoint: parameter name mismatch at index " +
                               std::to_string(i));
    Tensor t(rec.at("shape").get<std::vector<std::size_t>>(),
             rec.at("data").get<std::vector<double>>());
    if (!t.same_shape(params[i].value))
      throw std::runtime_error("checkpoint: shape mismatch for " + params[i].name);
    params[i].value = std::move(t);
  }
}

}  // namespace detail_models

inline void save_video_checkpoint(const VideoClassifier& model, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["kind"] = "video_classifier";
  const auto& c = model.config();
  j["config"] = {{"variant", c.variant},       {"input_dim", c.input_dim},
                 {"max_len", c.max_len},       {"hidden", c.hidden},
                 {"embed_dim", c.embed_dim},   {"init_seed", c.init_seed}};
  j["params"] = detail_models::params_to_json(model.params());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_video_checkpoint: cannot open " + path);
  out << j.dump() << '\n';
}

inline std::unique_ptr<VideoClassifier> load_video_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_video_checkpoint: cannot open " + path);
  const auto j = nlohmann::json::parse(in);
  if (j.at("kind").get<std::string>() != "video_classifier")
    throw std::runtime_error("load_video_checkpoint: not a video classifier checkpoint");
  const auto& c = j.at("config");
  VideoModelConfig cfg;
  cfg.variant = c.at("variant").get<std::string>();
  cfg.input_dim = c.at("input_dim").get<std::size_t>();
  cfg.max_len = c.at("max_len").get<std::size_t>();
  cfg.hidden = c.at("hidden").get<std::size_t>();
  cfg.embed_dim = c.at("embed_dim").get<std::size_t>();
  cfg.init_seed = c.at("init_seed").get<std::uint64_t>();
  auto model = make_video_classifier(cfg);
  detail_models::params_from_json(j.at("params"), model->params());
  return model;
}

inline void save_frame_checkpoint(const FrameClassifier& model, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["kind"] = "frame_classifier";
  const auto& c = model.config();
  j["config"] = {{"input_dim", c.input_dim},
                 {"hidden_units", c.hidden_units},
                 {"init_seed", c.init_seed},
                 {"allow_off_grid", c.allow_off_grid}};
  j["params"] = detail_models::params_to_json(model.params());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_frame_checkpoint: cannot open " + path);
  out << j.dump() << '\n';
}

inline FrameClassifier load_frame_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_frame_checkpoint: cannot open " + path);
  const auto j = nlohmann::json::parse(in);
  if (j.at("kind").get<std::string>() != "frame_classifier")
    throw std::runtime_error("load_frame_checkpoint: not a frame classifier checkpoint");
  const auto& c = j.at("config");
  FrameModelConfig cfg;
  cfg.input_dim = c.at("input_dim").get<std::size_t>();
  cfg.hidden_units = c.at("hidden_units").get<std::vector<std::size_t>>();
  cfg.init_seed = c.at("init_seed").get<std::uint64_t>();
  cfg.allow_off_grid = c.at("allow_off_grid").get<bool>();
  FrameClassifier model(cfg);
  detail_models::params_from_json(j.at("params"), model.params());
  return model;
}

}  // namespace wsfl
