#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsfl/autodiff.hpp"
#include "wsfl/models.hpp"
#include "wsfl/preprocess.hpp"
#include "wsfl/tensor.hpp"

namespace wsfl {

enum class SaliencyMethod { VanillaGradient, IntegratedGradients };

inline std::string to_string(SaliencyMethod m) {
  return m == SaliencyMethod::VanillaGradient ? "vanilla_gradient" : "integrated_gradients";
}

inline SaliencyMethod saliency_method_from_string(const std::string& s) {
  if (s == "vanilla_gradient" || s == "vg") return SaliencyMethod::VanillaGradient;
  if (s == "integrated_gradients" || s == "ig") return SaliencyMethod::IntegratedGradients;
  throw std::invalid_argument("unknown saliency method: " + s);
}

struct SaliencyMap {
  std::string video_id;
  SaliencyMethod method = SaliencyMethod::VanillaGradient;
  Tensor values;      // T × D, |attribution|
  Tensor raw_signed;  // T × D, IG only (empty for VG)
};

struct PseudoScores {
  std::string video_id;
  std::vector<double> scores;  // in [0,1]
  std::vector<double> raw;     // pre-normalization aggregates
};

/// Scalar model target for attribution: given a grad-tracked input, return
/// the scalar to differentiate. Lets tests attribute plain linear functions.
using SaliencyTarget = std::function<ad::Var(const ad::Var& input)>;

enum class SaliencyOutput { Probability, Logit };

inline SaliencyTarget model_target(const VideoClassifier& model, std::size_t true_len,
                                   SaliencyOutput output = SaliencyOutput::Probability) {
  return [&model, true_len, output](const ad::Var& x) {
    auto p = bind_params(model.params(), false);
    std::mt19937_64 rng(0);
    ad::Var l = model.logit(p, x, true_len, false, 0.0, rng);
    return output == SaliencyOutput::Probability ? ad::sigmoid(l) : l;
  };
}

inline Tensor input_gradient(const SaliencyTarget& target, const Tensor& input) {
  ad::Var x = ad::Var::leaf(input, true);
  ad::Var out = target(x);
  ad::backward(out);
  if (!x.has_grad()) return Tensor(input.shape());
  return x.grad();
}

inline SaliencyMap vanilla_gradient(const SaliencyTarget& target, const Tensor& input,
                                    std::string video_id = {}) {
  SaliencyMap map;
  map.video_id = std::move(video_id);
  map.method = SaliencyMethod::VanillaGradient;
  map.values = input_gradient(target, input);
  for (auto& v : map.values.data()) v = std::abs(v);
  return map;
}

/// Midpoint-rule path integral of gradients from `baseline` to `input`.
inline SaliencyMap integrated_gradients(const SaliencyTarget& target, const Tensor& input,
                                        const Tensor& baseline, std::size_t steps = 128,
                                        std::string video_id = {}) {
  if (!input.same_shape(baseline))
    throw std::invalid_argument("integrated_gradients: baseline shape mismatch");
  if (steps == 0) throw std::invalid_argument("integrated_gradients: steps must be >= 1");
  Tensor grad_sum(input.shape());
  Tensor point(input.shape());
  for (std::size_t k = 1; k <= steps; ++k) {
    const double alpha = (static_cast<double>(k) - 0.5) / static_cast<double>(steps);
    for (std::size_t i = 0; i < point.size(); ++i)
      point[i] = baseline[i] + alpha * (input[i] - baseline[i]);
    Tensor g = input_gradient(target, point);
    for (std::size_t i = 0; i < grad_sum.size(); ++i) grad_sum[i] += g[i];
  }
  SaliencyMap map;
  map.video_id = std::move(video_id);
  map.method = SaliencyMethod::IntegratedGradients;
  map.raw_signed = Tensor(input.shape());
  map.values = Tensor(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    map.raw_signed[i] =
        (input[i] - baseline[i]) * grad_sum[i] / static_cast<double>(steps);
    map.values[i] = std::abs(map.raw_signed[i]);
  }
  return map;
}

// Convenience wrappers over a trained video classifier; maps cover true T only.
inline SaliencyMap vanilla_gradient(const VideoClassifier& model, const FeatureSequence& f,
                                    SaliencyOutput output = SaliencyOutput::Probability) {
  return vanilla_gradient(model_target(model, f.length(), output), f.features, f.video_id);
}

inline SaliencyMap integrated_gradients(const VideoClassifier& model,
                                        const FeatureSequence& f, std::size_t steps = 128,
                                        SaliencyOutput output = SaliencyOutput::Probability) {
  // Zero displacement is the rest pose after offset preprocessing.
  return integrated_gradients(model_target(model, f.length(), output), f.features,
                              Tensor(f.features.shape()), steps, f.video_id);
}

inline SaliencyMap compute_saliency(const VideoClassifier& model, const FeatureSequence& f,
                                    SaliencyMethod method, std::size_t ig_steps = 128,
                                    SaliencyOutput output = SaliencyOutput::Probability) {
  return method == SaliencyMethod::VanillaGradient
             ? vanilla_gradient(model, f, output)
             : integrated_gradients(model, f, ig_steps, output);
}

enum class FrameAggregate { Sum, Mean, Max };

inline std::vector<double> aggregate_per_frame(const SaliencyMap& map,
                                               FrameAggregate reducer = FrameAggregate::Sum) {
  const std::size_t t_len = map.values.rows(), d = map.values.cols();
  std::vector<double> raw(t_len, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    double acc = reducer == FrameAggregate::Max ? 0.0 : 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double v = map.values(t, i);
      acc = reducer == FrameAggregate::Max ? std::max(acc, v) : acc + v;
    }
    raw[t] = reducer == FrameAggregate::Mean ? acc / static_cast<double>(d) : acc;
  }
  return raw;
}

/// Min-max normalize; a constant input maps to all zeros.
inline PseudoScores normalize_minmax(std::vector<double> raw, std::string video_id = {}) {
  if (raw.empty()) throw std::invalid_argument("normalize_minmax: empty input");
  PseudoScores out;
  out.video_id = std::move(video_id);
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  out.scores.resize(raw.size(), 0.0);
  if (hi > lo)
    for (std::size_t t = 0; t < raw.size(); ++t) out.scores[t] = (raw[t] - lo) / (hi - lo);
  out.raw = std::move(raw);
  return out;
}

inline PseudoScores pseudo_scores(const SaliencyMap& map,
                                  FrameAggregate reducer = FrameAggregate::Sum) {
  return normalize_minmax(aggregate_per_frame(map, reducer), map.video_id);
}

// Tab-separated export: one row per frame, one column per feature, plus a
// companion per-frame score file. Consumed by the report command.
inline void export_saliency(const SaliencyMap& map, const PseudoScores& scores,
                            const std::string& matrix_path, const std::string& scores_path) {
  std::ofstream mat(matrix_path);
  if (!mat) throw std::runtime_error("export_saliency: cannot open " + matrix_path);
  mat.precision(17);
  for (std::size_t t = 0; t < map.values.rows(); ++t) {
    for (std::size_t i = 0; i < map.values.cols(); ++i)
      mat << (i ? "\t" : "") << map.values(t, i);
    mat << '\n';
  }
  std::ofstream sc(scores_path);
  if (!sc) throw std::runtime_error("export_saliency: cannot open " + scores_path);
  sc.precision(17);
  sc << "frame\traw\tscore\n";
  for (std::size_t t = 0; t < scores.scores.size(); ++t)
    sc << t << '\t' << scores.raw[t] << '\t' << scores.scores[t] << '\n';
}

}  // namespace wsfl
