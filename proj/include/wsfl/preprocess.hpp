#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "wsfl/dataset.hpp"
#include "wsfl/tensor.hpp"

namespace wsfl {

/// Flattened per-frame displacement features, T × D with D = J*3.
struct FeatureSequence {
  std::string video_id;
  Tensor features;  // T × D

  std::size_t length() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

/// Subtract the first frame from every frame, turning absolute joint
/// positions into displacement trajectories. Frame 0 becomes all zeros.
inline PoseSequence offset_by_initial(const PoseSequence& seq) {
  if (seq.frames.empty()) throw std::invalid_argument("offset_by_initial: empty sequence");
  PoseSequence out = seq;
  const auto& first = seq.frames.front();
  for (auto& frame : out.frames)
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] -= first[i];
  return out;
}

/// Causal (trailing) moving average per coordinate; frames earlier than the
/// window use the shorter prefix. Length preserved.
inline PoseSequence moving_average(const PoseSequence& seq, std::size_t window = 5) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be >= 1");
  PoseSequence out = seq;
  const std::size_t t_len = seq.frames.size();
  if (t_len == 0 || window == 1) return out;
  const std::size_t dim = seq.frames.front().size();
  for (std::size_t t = 0; t < t_len; ++t) {
    const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
    const double n = static_cast<double>(t - lo + 1);
    for (std::size_t i = 0; i < dim; ++i) {
      double acc = 0.0;
      for (std::size_t s = lo; s <= t; ++s) acc += seq.frames[s][i];
      out.frames[t][i] = acc / n;
    }
  }
  return out;
}

/// Offset, smooth (window 5), flatten joint-major (x,y,z).
inline FeatureSequence to_features(const PoseSequence& seq, std::size_t window = 5) {
  PoseSequence smoothed = moving_average(offset_by_initial(seq), window);
  FeatureSequence out;
  out.video_id = seq.video_id;
  const std::size_t t_len = smoothed.frames.size();
  const std::size_t dim = smoothed.frames.empty() ? 0 : smoothed.frames.front().size();
  out.features = Tensor({t_len, dim});
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t i = 0; i < dim; ++i) out.features(t, i) = smoothed.frames[t][i];
  return out;
}

}  // namespace wsfl
