// Command-line front end for the weakly-supervised frame labeling pipeline.
// Subcommands mirror the pipeline stages, so a fold can be run end to end
// either monolithically (`loso`) or stage by stage
// (train-video -> saliency -> pseudolabel -> train-frame -> report).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wsfl/wsfl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FoldContext {
  wsfl::Dataset dataset;
  wsfl::LosoSplit split;
  std::uint64_t fold_seed = 0;
  std::size_t max_len = 0;
};

FoldContext make_fold_context(const std::string& data_path, const std::string& hold_out,
                              std::uint64_t seed) {
  FoldContext ctx;
  ctx.dataset = wsfl::load_dataset(data_path);
  ctx.max_len = ctx.dataset.max_length();
  auto splits = wsfl::loso_splits(ctx.dataset);
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i].held_out_subject == hold_out) {
      ctx.split = std::move(splits[i]);
      ctx.fold_seed = wsfl::pipeline::mix_seed(seed, i);
      return ctx;
    }
  }
  throw std::runtime_error("unknown hold-out subject: " + hold_out);
}

wsfl::RunConfig load_config(const std::string& config_path,
                            const std::optional<std::uint64_t>& seed_override,
                            const std::string& out_override) {
  wsfl::RunConfig cfg = wsfl::load_run_config(config_path);
  if (seed_override) cfg.seed = *seed_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  return cfg;
}

std::vector<int> stage_predictions(const wsfl::VideoClassifier& model,
                                   const wsfl::LosoSplit& split,
                                   const std::vector<wsfl::FeatureSequence>& features,
                                   const wsfl::RunConfig& cfg) {
  if (!cfg.use_true_video_labels)
    return wsfl::pipeline::predict_video_labels(model, features, cfg.decision_threshold);
  std::vector<int> preds;
  for (const auto& v : split.train.videos) preds.push_back(v.video_label);
  return preds;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Weakly-supervised frame-level compensation labeling pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // let the global options appear after the subcommand

  std::optional<std::uint64_t> seed_override;
  std::string out_override;
  std::string config_path;
  app.add_option("--seed", seed_override, "Override the config seed")->group("Global");
  app.add_option("--out", out_override, "Override the output path/directory")->group("Global");
  app.add_option("--config", config_path, "Run configuration file (JSON)")->group("Global");

  std::string data_path, hold_out, model_a_path, model_b_path, model_b_gt_path;
  std::string pseudo_path, in_dir, format = "text";
  bool ground_truth = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (JSONL)");

  auto* train_video =
      app.add_subcommand("train-video", "Train Model A on one LOSO training split");
  auto* saliency_cmd =
      app.add_subcommand("saliency", "Export saliency maps and pseudo-scores for a fold");
  auto* pseudolabel_cmd =
      app.add_subcommand("pseudolabel", "Calibrate thresholds and emit frame pseudo-labels");
  auto* train_frame =
      app.add_subcommand("train-frame", "Train Model B from pseudo-labels (or ground truth)");
  auto* report_cmd = app.add_subcommand(
      "report", "Evaluate one fold (with --hold-out) or aggregate fold results (--in)");
  auto* loso = app.add_subcommand("loso", "Full LOSO run from a run config");
  auto* grid = app.add_subcommand("grid", "Run a list of configs and tabulate the results");

  for (auto* cmd : {train_video, saliency_cmd, pseudolabel_cmd, train_frame, report_cmd}) {
    cmd->add_option("--data", data_path, "Dataset file (JSONL)");
    cmd->add_option("--hold-out", hold_out, "Held-out subject id for this fold");
  }
  for (auto* cmd : {saliency_cmd, pseudolabel_cmd, report_cmd})
    cmd->add_option("--model-a", model_a_path, "Model A checkpoint");
  train_frame->add_option("--pseudo", pseudo_path, "Pseudo-label file (JSONL)");
  train_frame->add_flag("--ground-truth", ground_truth,
                        "Train on ground-truth frame labels instead of pseudo-labels");
  report_cmd->add_option("--model-b", model_b_path, "Model B checkpoint");
  report_cmd->add_option("--model-b-gt", model_b_gt_path,
                         "Ground-truth-trained Model B checkpoint");
  report_cmd->add_option("--in", in_dir, "Directory of fold_result.json files to aggregate");
  report_cmd->add_option("--format", format, "Aggregate output format: text or csv");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    if (config_path.empty()) throw std::runtime_error("synth: --config is required");
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("synth: cannot open " + config_path);
    wsfl::SynthConfig cfg = wsfl::synth_config_from_json(json::parse(in));
    if (seed_override) cfg.seed = *seed_override;
    if (out_override.empty()) throw std::runtime_error("synth: --out is required");
    wsfl::save_dataset(wsfl::generate_synthetic(cfg), out_override);
    std::cout << "wrote " << out_override << "\n";
    return 0;
  }

  if (loso->parsed()) {
    wsfl::RunConfig cfg = load_config(config_path, seed_override, out_override);
    wsfl::StudyReport report = wsfl::run_loso(cfg);
    std::cout << wsfl::render_report_text(report);
    return 0;
  }

  if (grid->parsed()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("grid: cannot open " + config_path);
    json spec = json::parse(in);
    const json& list = spec.is_array() ? spec : spec.at("configs");
    std::vector<wsfl::RunConfig> configs;
    for (const auto& item : list) configs.push_back(wsfl::run_config_from_json(item));
    if (seed_override)
      for (auto& c : configs) c.seed = *seed_override;
    const std::string out = out_override.empty() ? "wsfl_grid" : out_override;
    auto rows = wsfl::run_grid(configs, out);
    std::cout << "wrote " << out << "/grid_summary.csv (" << rows.size() << " rows)\n";
    return 0;
  }

  // Everything below is a per-fold stage.
  wsfl::RunConfig cfg = load_config(config_path, seed_override, {});
  const std::string out = out_override.empty() ? wsfl::resolve_out_dir(cfg) : out_override;

  if (report_cmd->parsed() && !in_dir.empty()) {
    std::vector<wsfl::FoldResult> folds;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir))
      if (entry.is_regular_file() && entry.path().filename() == "fold_result.json")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f);
      folds.push_back(wsfl::fold_result_from_json(json::parse(in)));
    }
    if (folds.empty()) throw std::runtime_error("report: no fold_result.json files under " + in_dir);
    wsfl::StudyReport report = wsfl::aggregate_report(folds);
    const std::string rendered =
        format == "csv" ? wsfl::render_report_csv(report) : wsfl::render_report_text(report);
    if (out_override.empty()) {
      std::cout << rendered;
    } else {
      std::ofstream of(out_override);
      of << rendered;
    }
    return 0;
  }

  if (data_path.empty() || hold_out.empty())
    throw std::runtime_error("stage commands require --data and --hold-out");
  FoldContext ctx = make_fold_context(data_path, hold_out, cfg.seed);
  const auto features = wsfl::pipeline::preprocess_all(ctx.split.train);

  if (train_video->parsed()) {
    auto model = wsfl::pipeline::train_model_a(ctx.split.train, features, cfg, ctx.fold_seed,
                                               ctx.max_len);
    fs::create_directories(out);
    wsfl::save_video_checkpoint(*model, out + "/model_a.json");
    std::cout << "wrote " << out << "/model_a.json\n";
    return 0;
  }

  if (saliency_cmd->parsed()) {
    auto model = wsfl::load_video_checkpoint(model_a_path);
    const auto preds = stage_predictions(*model, ctx.split, features, cfg);
    fs::create_directories(out);
    std::size_t exported = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (preds[i] != 1) continue;
      wsfl::SaliencyMap map = wsfl::compute_saliency(*model, features[i], cfg.saliency_method,
                                                     cfg.ig_steps, cfg.saliency_output);
      wsfl::PseudoScores scores = wsfl::pseudo_scores(map, cfg.frame_aggregate);
      const std::string base = out + "/" + features[i].video_id;
      wsfl::export_saliency(map, scores, base + ".saliency.tsv", base + ".scores.tsv");
      ++exported;
    }
    std::cout << "exported saliency for " << exported << " videos to " << out << "\n";
    return 0;
  }

  if (pseudolabel_cmd->parsed()) {
    auto model = wsfl::load_video_checkpoint(model_a_path);
    const auto preds = stage_predictions(*model, ctx.split, features, cfg);
    const auto scores = wsfl::pipeline::score_videos(*model, features, preds, cfg);
    wsfl::CalibrationResult calib;
    if (cfg.calibrate)
      calib = wsfl::pipeline::calibrate(ctx.split.train, scores, preds, cfg);
    else
      calib.spec = cfg.threshold;
    auto pseudo = wsfl::pipeline::assemble_pseudo_dataset(features, scores, preds, calib.spec);
    fs::create_directories(out);
    wsfl::save_pseudo_labels(pseudo.per_video, out + "/pseudo_labels.jsonl");
    json tj;
    tj["mode"] = wsfl::to_string(calib.spec.mode);
    tj["scale"] = wsfl::to_string(calib.spec.scale);
    tj["tau"] = calib.spec.tau;
    tj["tau_low"] = calib.spec.tau_low;
    tj["tau_high"] = calib.spec.tau_high;
    tj["false_positives"] = calib.false_positives;
    tj["false_negatives"] = calib.false_negatives;
    std::ofstream(out + "/thresholds.json") << tj.dump(2) << '\n';
    std::cout << "wrote " << out << "/pseudo_labels.jsonl\n";
    return 0;
  }

  if (train_frame->parsed()) {
    wsfl::Tensor frames;
    std::vector<int> labels;
    std::uint64_t stream = 21;
    if (ground_truth) {
      wsfl::pipeline::ground_truth_frames(ctx.split.train, features, frames, labels);
      stream = 31;
    } else {
      if (pseudo_path.empty()) throw std::runtime_error("train-frame: --pseudo is required");
      const auto pseudo = wsfl::load_pseudo_labels(pseudo_path);
      std::map<std::string, const wsfl::FramePseudoLabels*> by_id;
      for (const auto& pl : pseudo) by_id[pl.video_id] = &pl;
      const std::size_t d = features.front().dim();
      std::vector<std::pair<std::size_t, std::size_t>> kept;
      for (std::size_t vi = 0; vi < features.size(); ++vi) {
        auto it = by_id.find(features[vi].video_id);
        if (it == by_id.end())
          throw std::runtime_error("train-frame: no pseudo-labels for " +
                                   features[vi].video_id);
        for (std::size_t t = 0; t < it->second->used.size(); ++t)
          if (it->second->used[t]) kept.emplace_back(vi, t);
      }
      frames = wsfl::Tensor({kept.size(), d});
      for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& [vi, t] = kept[i];
        const auto& src = features[vi].features;
        std::copy(src.data().begin() + t * d, src.data().begin() + (t + 1) * d,
                  frames.data().begin() + i * d);
        labels.push_back(by_id.at(features[vi].video_id)->labels[t]);
      }
    }
    wsfl::FrameClassifier model =
        wsfl::pipeline::train_model_b(frames, labels, cfg, ctx.fold_seed, stream);
    fs::create_directories(out);
    const std::string name = ground_truth ? "/model_b_gt.json" : "/model_b.json";
    wsfl::save_frame_checkpoint(model, out + name);
    std::cout << "wrote " << out << name << "\n";
    return 0;
  }

  if (report_cmd->parsed()) {
    if (model_a_path.empty()) throw std::runtime_error("report: --model-a is required");
    auto model_a = wsfl::load_video_checkpoint(model_a_path);
    std::optional<wsfl::FrameClassifier> model_b, model_b_gt;
    if (!model_b_path.empty()) model_b = wsfl::load_frame_checkpoint(model_b_path);
    if (!model_b_gt_path.empty()) model_b_gt = wsfl::load_frame_checkpoint(model_b_gt_path);
    wsfl::FoldResult fr = wsfl::pipeline::evaluate_fold(
        ctx.split, *model_a, model_b ? &*model_b : nullptr,
        model_b_gt ? &*model_b_gt : nullptr, cfg);
    fr.config_echo = wsfl::to_json(cfg);
    const std::string path = out_override.empty() ? "fold_result.json" : out_override;
    if (!fs::path(path).parent_path().empty())
      fs::create_directories(fs::path(path).parent_path());
    std::ofstream(path) << wsfl::to_json(fr).dump(2) << '\n';
    std::cout << "wrote " << path << "\n";
    return 0;
  }

  throw std::runtime_error("no subcommand handled");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
