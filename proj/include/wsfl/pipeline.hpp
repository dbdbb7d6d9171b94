#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsfl/dataset.hpp"
#include "wsfl/eval.hpp"
#include "wsfl/models.hpp"
#include "wsfl/preprocess.hpp"
#include "wsfl/pseudolabel.hpp"
#include "wsfl/saliency.hpp"

namespace wsfl {

/// Everything needed to reproduce a run bit-for-bit.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t jobs = 1;

  // Data source: a dataset file, or an inline synthetic config.
  std::string dataset_path;
  std::optional<SynthConfig> synth;

  VideoModelConfig model_a;
  TrainConfig train_a;

  SaliencyMethod saliency_method = SaliencyMethod::IntegratedGradients;
  std::size_t ig_steps = 128;
  SaliencyOutput saliency_output = SaliencyOutput::Probability;
  FrameAggregate frame_aggregate = FrameAggregate::Sum;

  bool calibrate = true;  // otherwise the fixed thresholds below are used
  ThresholdSpec threshold;
  std::size_t calibration_grid_points = 101;

  FrameModelConfig model_b;
  TrainConfig train_b;

  bool ground_truth_condition = false;  // also train Model B on true frame labels
  bool use_true_video_labels = false;   // debug: bypass Model A predictions
  double decision_threshold = 0.5;
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["jobs"] = c.jobs;
  if (c.synth)
    j["dataset"] = {{"synth", to_json(*c.synth)}};
  else
    j["dataset"] = {{"path", c.dataset_path}};
  j["model_a"] = {{"variant", c.model_a.variant},
                  {"hidden", c.model_a.hidden},
                  {"embed_dim", c.model_a.embed_dim}};
  auto train_json = [](const TrainConfig& t) {
    return nlohmann::json{{"learning_rate", t.learning_rate},
                          {"dropout", t.dropout},
                          {"batch_size", t.batch_size},
                          {"max_epochs", t.max_epochs},
                          {"early_stop_patience", t.early_stop_patience},
                          {"val_fraction", t.val_fraction},
                          {"allow_off_grid", t.allow_off_grid}};
  };
  j["train_a"] = train_json(c.train_a);
  j["train_b"] = train_json(c.train_b);
  j["saliency"] = {{"method", to_string(c.saliency_method)},
                   {"steps", c.ig_steps},
                   {"target", c.saliency_output == SaliencyOutput::Probability ? "probability"
                                                                               : "logit"},
                   {"aggregate", c.frame_aggregate == FrameAggregate::Sum    ? "sum"
                                 : c.frame_aggregate == FrameAggregate::Mean ? "mean"
                                                                             : "max"}};
  j["threshold"] = {{"mode", to_string(c.threshold.mode)},
                    {"scale", to_string(c.threshold.scale)},
                    {"calibrate", c.calibrate},
                    {"tau", c.threshold.tau},
                    {"tau_low", c.threshold.tau_low},
                    {"tau_high", c.threshold.tau_high},
                    {"grid_points", c.calibration_grid_points}};
  j["model_b"] = {{"hidden_units", c.model_b.hidden_units},
                  {"allow_off_grid", c.model_b.allow_off_grid}};
  j["ground_truth_condition"] = c.ground_truth_condition;
  j["use_true_video_labels"] = c.use_true_video_labels;
  j["decision_threshold"] = c.decision_threshold;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.jobs = j.value("jobs", c.jobs);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    if (d.contains("synth")) c.synth = synth_config_from_json(d.at("synth"));
    if (d.contains("path")) c.dataset_path = d.at("path").get<std::string>();
  }
  if (j.contains("model_a")) {
    const auto& m = j.at("model_a");
    c.model_a.variant = m.value("variant", c.model_a.variant);
    c.model_a.hidden = m.value("hidden", c.model_a.hidden);
    c.model_a.embed_dim = m.value("embed_dim", c.model_a.embed_dim);
  }
  auto parse_train = [&](const char* key, TrainConfig& t) {
    if (!j.contains(key)) return;
    const auto& tj = j.at(key);
    t.learning_rate = tj.value("learning_rate", t.learning_rate);
    t.dropout = tj.value("dropout", t.dropout);
    t.batch_size = tj.value("batch_size", t.batch_size);
    t.max_epochs = tj.value("max_epochs", t.max_epochs);
    t.early_stop_patience = tj.value("early_stop_patience", t.early_stop_patience);
    t.val_fraction = tj.value("val_fraction", t.val_fraction);
    t.allow_off_grid = tj.value("allow_off_grid", t.allow_off_grid);
  };
  parse_train("train_a", c.train_a);
  parse_train("train_b", c.train_b);
  if (j.contains("saliency")) {
    const auto& s = j.at("saliency");
    if (s.contains("method"))
      c.saliency_method = saliency_method_from_string(s.at("method").get<std::string>());
    c.ig_steps = s.value("steps", c.ig_steps);
    if (s.contains("target"))
      c.saliency_output = s.at("target").get<std::string>() == "logit"
                              ? SaliencyOutput::Logit
                              : SaliencyOutput::Probability;
    if (s.contains("aggregate")) {
      const auto a = s.at("aggregate").get<std::string>();
      c.frame_aggregate = a == "mean"  ? FrameAggregate::Mean
                          : a == "max" ? FrameAggregate::Max
                                       : FrameAggregate::Sum;
    }
  }
  if (j.contains("threshold")) {
    const auto& t = j.at("threshold");
    if (t.contains("mode"))
      c.threshold.mode = t.at("mode").get<std::string>() == "dual" ? ThresholdMode::Dual
                                                                   : ThresholdMode::Single;
    if (t.contains("scale"))
      c.threshold.scale = t.at("scale").get<std::string>() == "raw"
                              ? ScoreScale::RawAggregates
                              : ScoreScale::NormalizedScores;
    c.calibrate = t.value("calibrate", c.calibrate);
    c.threshold.tau = t.value("tau", c.threshold.tau);
    c.threshold.tau_low = t.value("tau_low", c.threshold.tau_low);
    c.threshold.tau_high = t.value("tau_high", c.threshold.tau_high);
    c.calibration_grid_points = t.value("grid_points", c.calibration_grid_points);
  }
  if (j.contains("model_b")) {
    const auto& m = j.at("model_b");
    if (m.contains("hidden_units"))
      c.model_b.hidden_units = m.at("hidden_units").get<std::vector<std::size_t>>();
    c.model_b.allow_off_grid = m.value("allow_off_grid", c.model_b.allow_off_grid);
  }
  c.ground_truth_condition = j.value("ground_truth_condition", c.ground_truth_condition);
  c.use_true_video_labels = j.value("use_true_video_labels", c.use_true_video_labels);
  c.decision_threshold = j.value("decision_threshold", c.decision_threshold);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_run_config: cannot open " + path);
  return run_config_from_json(nlohmann::json::parse(in));
}

// ---------------------------------------------------------------------------
// Pipeline stages. The monolithic LOSO driver and the stage-wise CLI both go
// through these functions, so the two paths agree bit for bit.

namespace pipeline {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<FeatureSequence> preprocess_all(const Dataset& ds) {
  std::vector<FeatureSequence> out;
  out.reserve(ds.videos.size());
  for (const auto& v : ds.videos) out.push_back(to_features(v.sequence));
  return out;
}

inline std::unique_ptr<VideoClassifier> train_model_a(
    const Dataset& train, const std::vector<FeatureSequence>& features, const RunConfig& cfg,
    std::uint64_t fold_seed, std::size_t max_len, TrainReport* report = nullptr) {
  VideoModelConfig mc = cfg.model_a;
  mc.input_dim = features.front().dim();
  mc.max_len = max_len;
  mc.init_seed = mix_seed(fold_seed, 11);
  auto model = make_video_classifier(mc);
  std::vector<int> labels;
  for (const auto& v : train.videos) labels.push_back(v.video_label);
  TrainConfig tc = cfg.train_a;
  tc.seed = mix_seed(fold_seed, 12);
  TrainReport r = train_video_classifier(*model, features, labels, tc);
  if (report) *report = r;
  return model;
}

inline std::vector<int> predict_video_labels(const VideoClassifier& model,
                                             const std::vector<FeatureSequence>& features,
                                             double decision_threshold) {
  std::vector<int> preds;
  preds.reserve(features.size());
  for (const auto& f : features) preds.push_back(model.predict_label(f, decision_threshold));
  return preds;
}

/// Pseudo-scores for every predicted-positive video; empty scores otherwise
/// (a negative prediction never needs a saliency pass).
inline std::vector<PseudoScores> score_videos(const VideoClassifier& model,
                                              const std::vector<FeatureSequence>& features,
                                              const std::vector<int>& preds,
                                              const RunConfig& cfg) {
  std::vector<PseudoScores> scores(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (preds[i] != 1) {
      scores[i].video_id = features[i].video_id;
      scores[i].scores.assign(features[i].length(), 0.0);
      scores[i].raw.assign(features[i].length(), 0.0);
      continue;
    }
    scores[i] = pseudo_scores(compute_saliency(model, features[i], cfg.saliency_method,
                                               cfg.ig_steps, cfg.saliency_output),
                              cfg.frame_aggregate);
  }
  return scores;
}

inline CalibrationResult calibrate(const Dataset& train, const std::vector<PseudoScores>& scores,
                                   const std::vector<int>& preds, const RunConfig& cfg) {
  std::vector<ScoredVideo> calib;
  for (std::size_t i = 0; i < train.videos.size(); ++i) {
    if (!train.videos[i].frame_labels) continue;
    calib.push_back({scores[i], preds[i], *train.videos[i].frame_labels});
  }
  if (calib.empty())
    throw std::runtime_error("calibrate: no reference frame labels in the training split");
  return calibrate_thresholds(calib, cfg.threshold.mode, cfg.threshold.scale,
                              cfg.calibration_grid_points);
}

inline PseudoDataset assemble_pseudo_dataset(const std::vector<FeatureSequence>& features,
                                             const std::vector<PseudoScores>& scores,
                                             const std::vector<int>& preds,
                                             const ThresholdSpec& spec) {
  PseudoDataset out;
  const std::size_t d = features.empty() ? 0 : features.front().dim();
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  for (std::size_t vi = 0; vi < features.size(); ++vi) {
    FramePseudoLabels pl = apply_threshold(scores[vi], preds[vi], spec);
    pl.video_id = features[vi].video_id;
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

inline FrameClassifier train_model_b(const Tensor& frames, const std::vector<int>& labels,
                                     const RunConfig& cfg, std::uint64_t fold_seed,
                                     std::uint64_t stream, TrainReport* report = nullptr) {
  FrameModelConfig mc = cfg.model_b;
  mc.input_dim = frames.cols();
  mc.init_seed = mix_seed(fold_seed, stream);
  FrameClassifier model(mc);
  TrainConfig tc = cfg.train_b;
  tc.seed = mix_seed(fold_seed, stream + 1);
  TrainReport r = train_frame_classifier(model, frames, labels, tc);
  if (report) *report = r;
  return model;
}

/// Frame-level training set built from true frame labels, for the
/// fully-supervised comparison condition.
inline void ground_truth_frames(const Dataset& train,
                                const std::vector<FeatureSequence>& features, Tensor& frames,
                                std::vector<int>& labels) {
  std::size_t n = 0;
  for (const auto& v : train.videos) {
    if (!v.frame_labels)
      throw std::runtime_error("ground_truth_frames: missing frame labels for " +
                               v.sequence.video_id);
    n += v.frame_labels->size();
  }
  const std::size_t d = features.front().dim();
  frames = Tensor({n, d});
  labels.clear();
  labels.reserve(n);
  std::size_t row = 0;
  for (std::size_t vi = 0; vi < train.videos.size(); ++vi) {
    const auto& src = features[vi].features;
    std::copy(src.data().begin(), src.data().end(), frames.data().begin() + row * d);
    row += src.rows();
    labels.insert(labels.end(), train.videos[vi].frame_labels->begin(),
                  train.videos[vi].frame_labels->end());
  }
}

inline FoldResult evaluate_fold(const LosoSplit& split, const VideoClassifier& model_a,
                                const FrameClassifier* model_b,
                                const FrameClassifier* model_b_gt, const RunConfig& cfg) {
  FoldResult fr;
  fr.held_out_subject = split.held_out_subject;
  fr.model_variant = cfg.model_a.variant;
  fr.saliency_method = to_string(cfg.saliency_method);
  fr.threshold_mode = to_string(cfg.threshold.mode);

  const auto test_features = preprocess_all(split.test);
  std::vector<double> video_probs;
  std::vector<int> video_labels;
  for (std::size_t i = 0; i < split.test.videos.size(); ++i) {
    video_probs.push_back(model_a.predict_prob(test_features[i]));
    video_labels.push_back(split.test.videos[i].video_label);
  }
  fr.video_auc = auc(video_probs, video_labels);

  std::vector<double> frame_probs, frame_probs_gt, baseline_scores;
  std::vector<int> frame_labels, frame_preds;
  for (std::size_t i = 0; i < split.test.videos.size(); ++i) {
    const auto& v = split.test.videos[i];
    if (!v.frame_labels) continue;
    const int broadcast = video_probs[i] > cfg.decision_threshold ? 1 : 0;
    const Tensor& x = test_features[i].features;
    std::vector<double> probs = model_b ? model_b->predict_probs(x) : std::vector<double>();
    std::vector<double> probs_gt =
        model_b_gt ? model_b_gt->predict_probs(x) : std::vector<double>();
    for (std::size_t t = 0; t < v.frame_labels->size(); ++t) {
      frame_labels.push_back((*v.frame_labels)[t]);
      baseline_scores.push_back(static_cast<double>(broadcast));
      if (model_b) {
        frame_probs.push_back(probs[t]);
        frame_preds.push_back(probs[t] > cfg.decision_threshold ? 1 : 0);
      }
      if (model_b_gt) frame_probs_gt.push_back(probs_gt[t]);
    }
  }
  if (!frame_labels.empty()) {
    if (model_b) {
      fr.frame_auc = auc(frame_probs, frame_labels);
      fr.frame_counts = confusion_counts(frame_labels, frame_preds);
    }
    if (model_b_gt) fr.frame_auc_ground_truth = auc(frame_probs_gt, frame_labels);
    fr.baseline_frame_auc = auc(baseline_scores, frame_labels);
  }
  return fr;
}

}  // namespace pipeline

// ---------------------------------------------------------------------------
// LOSO driver

inline Dataset resolve_dataset(const RunConfig& cfg) {
  if (cfg.synth) return generate_synthetic(*cfg.synth);
  if (cfg.dataset_path.empty())
    throw std::invalid_argument("RunConfig: no dataset path or synth config");
  return load_dataset(cfg.dataset_path);
}

inline std::string resolve_out_dir(const RunConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("WSFL_OUT_DIR")) return env;
  return "wsfl_out";
}

inline FoldResult run_fold(const LosoSplit& split, const RunConfig& cfg,
                           std::uint64_t fold_seed, std::size_t max_len,
                           const std::string& fold_dir = {}) {
  namespace pl = pipeline;
  const auto features = pl::preprocess_all(split.train);

  TrainReport report_a;
  auto model_a = pl::train_model_a(split.train, features, cfg, fold_seed, max_len, &report_a);

  std::vector<int> preds;
  if (cfg.use_true_video_labels) {
    for (const auto& v : split.train.videos) preds.push_back(v.video_label);
  } else {
    preds = pl::predict_video_labels(*model_a, features, cfg.decision_threshold);
  }
  const auto scores = pl::score_videos(*model_a, features, preds, cfg);

  CalibrationResult calib;
  if (cfg.calibrate) {
    calib = pl::calibrate(split.train, scores, preds, cfg);
  } else {
    calib.spec = cfg.threshold;
  }

  PseudoDataset pseudo = pl::assemble_pseudo_dataset(features, scores, preds, calib.spec);
  if (pseudo.labels.empty())
    throw std::runtime_error("run_fold: pseudo-label selection kept no frames");
  FrameClassifier model_b = pl::train_model_b(pseudo.frames, pseudo.labels, cfg, fold_seed, 21);

  std::optional<FrameClassifier> model_b_gt;
  if (cfg.ground_truth_condition) {
    Tensor gt_frames;
    std::vector<int> gt_labels;
    pl::ground_truth_frames(split.train, features, gt_frames, gt_labels);
    model_b_gt = pl::train_model_b(gt_frames, gt_labels, cfg, fold_seed, 31);
  }

  FoldResult fr = pl::evaluate_fold(split, *model_a, &model_b,
                                    model_b_gt ? &*model_b_gt : nullptr, cfg);
  fr.config_echo = to_json(cfg);

  if (!fold_dir.empty()) {
    std::filesystem::create_directories(fold_dir);
    save_video_checkpoint(*model_a, fold_dir + "/model_a.json");
    save_frame_checkpoint(model_b, fold_dir + "/model_b.json");
    if (model_b_gt) save_frame_checkpoint(*model_b_gt, fold_dir + "/model_b_gt.json");
    save_pseudo_labels(pseudo.per_video, fold_dir + "/pseudo_labels.jsonl");
    nlohmann::json tj;
    tj["mode"] = to_string(calib.spec.mode);
    tj["scale"] = to_string(calib.spec.scale);
    tj["tau"] = calib.spec.tau;
    tj["tau_low"] = calib.spec.tau_low;
    tj["tau_high"] = calib.spec.tau_high;
    tj["calibrated"] = cfg.calibrate;
    tj["false_positives"] = calib.false_positives;
    tj["false_negatives"] = calib.false_negatives;
    std::ofstream(fold_dir + "/thresholds.json") << tj.dump(2) << '\n';
    std::ofstream(fold_dir + "/fold_result.json") << to_json(fr).dump(2) << '\n';
  }
  return fr;
}

inline StudyReport run_loso(const RunConfig& cfg, const Dataset* preloaded = nullptr) {
  const Dataset dataset = preloaded ? *preloaded : resolve_dataset(cfg);
  const auto splits = loso_splits(dataset);
  const std::size_t max_len = dataset.max_length();
  const std::string out_dir = resolve_out_dir(cfg);
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir + "/run_config.json") << to_json(cfg).dump(2) << '\n';

  std::vector<FoldResult> folds(splits.size());
  auto run_one = [&](std::size_t i) {
    const std::uint64_t fold_seed = pipeline::mix_seed(cfg.seed, i);
    const std::string fold_dir = out_dir + "/fold_" + splits[i].held_out_subject;
    try {
      folds[i] = run_fold(splits[i], cfg, fold_seed, max_len, fold_dir);
    } catch (const std::exception& e) {
      folds[i].held_out_subject = splits[i].held_out_subject;
      folds[i].model_variant = cfg.model_a.variant;
      folds[i].saliency_method = to_string(cfg.saliency_method);
      folds[i].threshold_mode = to_string(cfg.threshold.mode);
      folds[i].error = e.what();
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < splits.size(); ++i) run_one(i);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t i = 0; i < splits.size(); ++i) {
      if (pending.size() >= jobs) {
        pending.front().get();
        pending.erase(pending.begin());
      }
      pending.push_back(std::async(std::launch::async, run_one, i));
    }
    for (auto& f : pending) f.get();
  }

  StudyReport report = aggregate_report(folds);
  std::ofstream(out_dir + "/report.txt") << render_report_text(report);
  std::ofstream(out_dir + "/report.csv") << render_report_csv(report);
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) folds_json.push_back(to_json(f));
  std::ofstream(out_dir + "/folds.json") << folds_json.dump(2) << '\n';
  return report;
}

// ---------------------------------------------------------------------------
// Hyperparameter grid

struct GridRow {
  std::size_t config_index = 0;
  std::string model, method, threshold_mode;
  double mean_video_auc = 0.0;
  double mean_frame_auc = 0.0;
  std::uint64_t seed = 0;
  std::string error;
  bool best_in_cell = false;
};

inline std::vector<GridRow> run_grid(const std::vector<RunConfig>& configs,
                                     const std::string& out_dir) {
  if (configs.empty()) throw std::invalid_argument("run_grid: empty grid");
  std::filesystem::create_directories(out_dir);
  std::vector<GridRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    RunConfig cfg = configs[i];
    cfg.out_dir = out_dir + "/config_" + std::to_string(i);
    GridRow row;
    row.config_index = i;
    row.model = cfg.model_a.variant;
    row.method = to_string(cfg.saliency_method);
    row.threshold_mode = to_string(cfg.threshold.mode);
    row.seed = cfg.seed;
    try {
      StudyReport report = run_loso(cfg);
      for (const auto& c : report.cells) {
        if (c.table == "video") row.mean_video_auc = c.mean;
        if (c.table == "frame" && c.threshold_mode == row.threshold_mode)
          row.mean_frame_auc = c.mean;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  // Flag the best mean frame AUC per (model, method, threshold-mode) cell.
  for (auto& row : rows) {
    if (!row.error.empty()) continue;
    row.best_in_cell = true;
    for (const auto& other : rows)
      if (other.error.empty() && other.model == row.model && other.method == row.method &&
          other.threshold_mode == row.threshold_mode &&
          other.mean_frame_auc > row.mean_frame_auc)
        row.best_in_cell = false;
  }
  std::ofstream csv(out_dir + "/grid_summary.csv");
  csv.precision(17);
  csv << "config_index,model,method,threshold_mode,seed,mean_video_auc,mean_frame_auc,best,"
         "error\n";
  for (const auto& r : rows)
    csv << r.config_index << ',' << r.model << ',' << r.method << ',' << r.threshold_mode
        << ',' << r.seed << ',' << r.mean_video_auc << ',' << r.mean_frame_auc << ','
        << (r.best_in_cell ? 1 : 0) << ',' << r.error << '\n';
  return rows;
}

}  // namespace wsfl
