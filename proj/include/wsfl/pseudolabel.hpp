#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsfl/saliency.hpp"

namespace wsfl {

struct FramePseudoLabels {
  std::string video_id;
  std::vector<int> labels;  // meaningful only where used[t]
  std::vector<bool> used;   // false marks the dual-threshold "Not Used" band
};

enum class ThresholdMode { Single, Dual };
enum class ScoreScale { NormalizedScores, RawAggregates };

inline std::string to_string(ThresholdMode m) {
  return m == ThresholdMode::Single ? "single" : "dual";
}

inline std::string to_string(ScoreScale s) {
  return s == ScoreScale::NormalizedScores ? "normalized" : "raw";
}

struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::Single;
  ScoreScale scale = ScoreScale::NormalizedScores;
  double tau = 0.5;         // single
  double tau_low = 0.25;    // dual
  double tau_high = 0.75;   // dual

  void validate() const {
    if (mode == ThresholdMode::Single) {
      if (!std::isfinite(tau)) throw std::invalid_argument("ThresholdSpec: tau must be finite");
    } else if (!(tau_low < tau_high)) {
      throw std::invalid_argument("ThresholdSpec: requires tau_low < tau_high");
    }
  }

  const std::vector<double>& values_for(const PseudoScores& s) const {
    return scale == ScoreScale::NormalizedScores ? s.scores : s.raw;
  }
};

/// Single-threshold rule: a predicted-normal video gets all zeros; otherwise
/// a frame is positive iff its score strictly exceeds tau.
inline FramePseudoLabels single_threshold(const PseudoScores& scores, int video_pred,
                                          double tau,
                                          ScoreScale scale = ScoreScale::NormalizedScores) {
  const auto& s = scale == ScoreScale::NormalizedScores ? scores.scores : scores.raw;
  FramePseudoLabels out;
  out.video_id = scores.video_id;
  out.labels.assign(s.size(), 0);
  out.used.assign(s.size(), true);
  if (video_pred == 1)
    for (std::size_t t = 0; t < s.size(); ++t) out.labels[t] = s[t] > tau ? 1 : 0;
  return out;
}

/// Dual-threshold rule: scores strictly below tau_low are confident normals,
/// strictly above tau_high confident compensations; the closed band
/// [tau_low, tau_high] is excluded from use.
inline FramePseudoLabels dual_threshold(const PseudoScores& scores, int video_pred,
                                        double tau_low, double tau_high,
                                        ScoreScale scale = ScoreScale::NormalizedScores) {
  if (!(tau_low < tau_high))
    throw std::invalid_argument("dual_threshold: requires tau_low < tau_high");
  const auto& s = scale == ScoreScale::NormalizedScores ? scores.scores : scores.raw;
  FramePseudoLabels out;
  out.video_id = scores.video_id;
  out.labels.assign(s.size(), 0);
  out.used.assign(s.size(), true);
  if (video_pred != 1) return out;
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (s[t] < tau_low) {
      out.labels[t] = 0;
    } else if (s[t] > tau_high) {
      out.labels[t] = 1;
    } else {
      out.used[t] = false;
    }
  }
  return out;
}

inline FramePseudoLabels apply_threshold(const PseudoScores& scores, int video_pred,
                                         const ThresholdSpec& spec) {
  spec.validate();
  return spec.mode == ThresholdMode::Single
             ? single_threshold(scores, video_pred, spec.tau, spec.scale)
             : dual_threshold(scores, video_pred, spec.tau_low, spec.tau_high, spec.scale);
}

/// One calibration video: its scores, the video-level prediction driving the
/// rule, and reference frame labels to score candidates against.
struct ScoredVideo {
  PseudoScores scores;
  int video_pred = 0;
  std::vector<int> reference_labels;
};

struct CalibrationResult {
  ThresholdSpec spec;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

namespace detail_pseudo {

inline void count_errors(const std::vector<ScoredVideo>& videos, const ThresholdSpec& spec,
                         std::size_t& fp, std::size_t& fn) {
  fp = fn = 0;
  for (const auto& v : videos) {
    FramePseudoLabels pl = apply_threshold(v.scores, v.video_pred, spec);
    for (std::size_t t = 0; t < pl.labels.size(); ++t) {
      if (!pl.used[t]) continue;
      if (pl.labels[t] == 1 && v.reference_labels[t] == 0) ++fp;
      if (pl.labels[t] == 0 && v.reference_labels[t] == 1) ++fn;
    }
  }
}

inline std::vector<double> candidate_grid(const std::vector<ScoredVideo>& videos,
                                          ScoreScale scale, std::size_t points = 101) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& v : videos) {
    ThresholdSpec probe;
    probe.scale = scale;
    for (double s : probe.values_for(v.scores)) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  if (!std::isfinite(lo)) throw std::invalid_argument("calibrate_thresholds: no scores");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  // Degenerate range: a single candidate just above the common value so that
  // nothing exceeds it (FP = 0).
  if (hi <= lo) grid.assign(1, std::nextafter(lo, std::numeric_limits<double>::infinity()));
  return grid;
}

}  // namespace detail_pseudo

/// Grid search minimizing |FP - FN| on the calibration videos; ties resolve
/// toward the smaller threshold(s).
inline CalibrationResult calibrate_thresholds(const std::vector<ScoredVideo>& videos,
                                              ThresholdMode mode,
                                              ScoreScale scale = ScoreScale::NormalizedScores,
                                              std::size_t grid_points = 101) {
  if (videos.empty()) throw std::invalid_argument("calibrate_thresholds: empty calibration set");
  for (const auto& v : videos)
    if (v.reference_labels.size() != v.scores.scores.size())
      throw std::invalid_argument("calibrate_thresholds: reference label length mismatch");
  const auto grid = detail_pseudo::candidate_grid(videos, scale, grid_points);

  CalibrationResult best;
  best.spec.mode = mode;
  best.spec.scale = scale;
  long long best_gap = -1;
  auto consider = [&](const ThresholdSpec& spec) {
    std::size_t fp, fn;
    detail_pseudo::count_errors(videos, spec, fp, fn);
    const long long gap = std::llabs(static_cast<long long>(fp) - static_cast<long long>(fn));
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      best.spec = spec;
      best.false_positives = fp;
      best.false_negatives = fn;
    }
  };

  if (mode == ThresholdMode::Single) {
    for (double tau : grid) {
      ThresholdSpec spec;
      spec.mode = ThresholdMode::Single;
      spec.scale = scale;
      spec.tau = tau;
      consider(spec);
    }
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t j = i + 1; j < grid.size(); ++j) {
        ThresholdSpec spec;
        spec.mode = ThresholdMode::Dual;
        spec.scale = scale;
        spec.tau_low = grid[i];
        spec.tau_high = grid[j];
        consider(spec);
      }
    if (best_gap < 0) {
      // One-point grid cannot form a pair; fall back to a band above the top.
      ThresholdSpec spec;
      spec.mode = ThresholdMode::Dual;
      spec.scale = scale;
      spec.tau_low = grid.front();
      spec.tau_high = std::nextafter(grid.front(), std::numeric_limits<double>::infinity());
      consider(spec);
    }
  }
  return best;
}

/// Frame-level training set assembled from Model A predictions: (feature
/// vector, pseudo-label) pairs over used frames only.
struct PseudoDataset {
  Tensor frames;            // N × D
  std::vector<int> labels;  // length N
  std::vector<FramePseudoLabels> per_video;
};

inline PseudoDataset build_pseudo_dataset(const std::vector<FeatureSequence>& features,
                                          const VideoClassifier& model_a,
                                          SaliencyMethod method, const ThresholdSpec& spec,
                                          std::size_t ig_steps = 128,
                                          FrameAggregate reducer = FrameAggregate::Sum,
                                          const std::vector<int>* video_pred_override = nullptr) {
  spec.validate();
  PseudoDataset out;
  const std::size_t d = features.empty() ? 0 : features.front().dim();
  std::vector<std::pair<std::size_t, std::size_t>> kept;  // (video, frame)
  for (std::size_t vi = 0; vi < features.size(); ++vi) {
    const auto& f = features[vi];
    const int pred = video_pred_override ? (*video_pred_override)[vi]
                                         : model_a.predict_label(f);
    FramePseudoLabels pl;
    if (pred == 0) {
      // Negative prediction: every frame used with label 0, no saliency pass.
      pl.video_id = f.video_id;
      pl.labels.assign(f.length(), 0);
      pl.used.assign(f.length(), true);
    } else {
      PseudoScores s = pseudo_scores(compute_saliency(model_a, f, method, ig_steps), reducer);
      pl = apply_threshold(s, pred, spec);
    }
    for (std::size_t t = 0; t < pl.used.size(); ++t)
      if (pl.used[t]) kept.emplace_back(vi, t);
    out.per_video.push_back(std::move(pl));
  }
  out.frames = Tensor({kept.size(), d});
  out.labels.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& [vi, t] = kept[i];
    const auto& src = features[vi].features;
    std::copy(src.data().begin() + t * d, src.data().begin() + (t + 1) * d,
              out.frames.data().begin() + i * d);
    out.labels.push_back(out.per_video[vi].labels[t]);
  }
  return out;
}

// Line-delimited pseudo-label export for audit and stage-wise training.
inline void save_pseudo_labels(const std::vector<FramePseudoLabels>& labels,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_pseudo_labels: cannot open " + path);
  for (const auto& pl : labels) {
    nlohmann::json rec;
    rec["video_id"] = pl.video_id;
    rec["labels"] = pl.labels;
    rec["used"] = std::vector<int>(pl.used.begin(), pl.used.end());
    out << rec.dump() << '\n';
  }
}

inline std::vector<FramePseudoLabels> load_pseudo_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pseudo_labels: cannot open " + path);
  std::vector<FramePseudoLabels> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      FramePseudoLabels pl;
      pl.video_id = rec.at("video_id").get<std::string>();
      pl.labels = rec.at("labels").get<std::vector<int>>();
      const auto used = rec.at("used").get<std::vector<int>>();
      pl.used.assign(used.begin(), used.end());
      if (pl.labels.size() != pl.used.size())
        throw std::runtime_error("labels/used length mismatch");
      out.push_back(std::move(pl));
    } catch (const std::exception& e) {
      throw std::runtime_error("load_pseudo_labels: " + path + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return out;
}

}  // namespace wsfl
