#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "wsfl/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// small but learnable end-to-end configuration
wsfl::RunConfig small_config(const std::string& out_dir, std::uint64_t seed = 7) {
  wsfl::RunConfig cfg;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  wsfl::SynthConfig sc;
  sc.n_subjects = 3;
  sc.trials_per_subject = 4;
  sc.frames = 20;
  sc.compensation_rate = 0.5;
  sc.seed = 17;
  cfg.synth = sc;
  cfg.model_a.variant = "temporal_attention";
  cfg.model_a.embed_dim = 8;
  cfg.train_a.learning_rate = 1e-3;
  cfg.train_a.batch_size = 16;
  cfg.train_a.max_epochs = 6;
  cfg.train_a.early_stop_patience = 6;
  cfg.saliency_method = wsfl::SaliencyMethod::IntegratedGradients;
  cfg.ig_steps = 4;
  cfg.calibrate = true;
  cfg.model_b.hidden_units = {32};
  cfg.train_b.learning_rate = 1e-3;
  cfg.train_b.batch_size = 32;
  cfg.train_b.max_epochs = 6;
  cfg.train_b.early_stop_patience = 6;
  cfg.ground_truth_condition = true;
  return cfg;
}

TEST(MixSeed, DeterministicAndStreamSeparated) {
  EXPECT_EQ(wsfl::pipeline::mix_seed(5, 1), wsfl::pipeline::mix_seed(5, 1));
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed : {0ull, 1ull, 42ull})
    for (std::uint64_t stream = 0; stream < 40; ++stream)
      EXPECT_TRUE(seen.insert(wsfl::pipeline::mix_seed(seed, stream)).second)
          << seed << "/" << stream;
}

TEST(RunConfigJson, FullRoundTrip) {
  auto cfg = small_config("/tmp/x", 123);
  cfg.jobs = 2;
  cfg.threshold.mode = wsfl::ThresholdMode::Dual;
  cfg.threshold.scale = wsfl::ScoreScale::RawAggregates;
  cfg.threshold.tau_low = 0.1;
  cfg.threshold.tau_high = 0.9;
  cfg.calibrate = false;
  cfg.use_true_video_labels = true;
  cfg.decision_threshold = 0.4;
  cfg.frame_aggregate = wsfl::FrameAggregate::Max;
  cfg.saliency_output = wsfl::SaliencyOutput::Logit;
  const auto back = wsfl::run_config_from_json(wsfl::to_json(cfg));
  EXPECT_EQ(wsfl::to_json(back), wsfl::to_json(cfg));  // lossless JSON round trip
  EXPECT_EQ(back.seed, 123u);
  EXPECT_EQ(back.threshold.mode, wsfl::ThresholdMode::Dual);
  EXPECT_EQ(back.threshold.scale, wsfl::ScoreScale::RawAggregates);
  EXPECT_TRUE(back.use_true_video_labels);
  EXPECT_FALSE(back.calibrate);
  EXPECT_EQ(back.frame_aggregate, wsfl::FrameAggregate::Max);
  EXPECT_EQ(back.saliency_output, wsfl::SaliencyOutput::Logit);
  ASSERT_TRUE(back.synth.has_value());
  EXPECT_EQ(back.synth->n_subjects, 3u);
}

TEST(RunLoso, ProducesOneFoldPerSubjectAndAllArtifacts) {
  const std::string out = std::string(::testing::TempDir()) + "loso_artifacts";
  fs::remove_all(out);
  const auto cfg = small_config(out);
  const auto report = wsfl::run_loso(cfg);
  ASSERT_EQ(report.folds.size(), 3u);
  std::set<std::string> held;
  for (const auto& f : report.folds) {
    EXPECT_FALSE(f.error.has_value()) << f.error.value_or("");
    held.insert(f.held_out_subject);
    EXPECT_TRUE(f.video_auc.has_value());
    EXPECT_TRUE(f.frame_auc.has_value());
    EXPECT_TRUE(f.frame_auc_ground_truth.has_value());
    EXPECT_TRUE(f.baseline_frame_auc.has_value());
    EXPECT_EQ(f.model_variant, "temporal_attention");
    EXPECT_EQ(f.saliency_method, "integrated_gradients");
    EXPECT_EQ(f.threshold_mode, "single");
  }
  EXPECT_EQ(held.size(), 3u);

  for (const char* name : {"run_config.json", "report.txt", "report.csv", "folds.json"})
    EXPECT_TRUE(fs::exists(out + "/" + name)) << name;
  for (const auto& f : report.folds) {
    const std::string fold_dir = out + "/fold_" + f.held_out_subject;
    for (const char* name : {"model_a.json", "model_b.json", "model_b_gt.json",
                             "pseudo_labels.jsonl", "thresholds.json", "fold_result.json"})
      EXPECT_TRUE(fs::exists(fold_dir + "/" + name)) << fold_dir << "/" << name;
    // the written fold result parses back to the in-memory one
    const auto back =
        wsfl::fold_result_from_json(nlohmann::json::parse(slurp(fold_dir + "/fold_result.json")));
    EXPECT_EQ(back.video_auc, f.video_auc);
    EXPECT_EQ(back.frame_auc, f.frame_auc);
  }
}

TEST(RunLoso, RepeatRunIsByteIdentical) {
  const std::string out = std::string(::testing::TempDir()) + "loso_repeat";
  fs::remove_all(out);
  const auto cfg = small_config(out);
  wsfl::run_loso(cfg);
  const std::string report_csv = slurp(out + "/report.csv");
  const std::string folds = slurp(out + "/folds.json");
  const std::string model_a = slurp(out + "/fold_S1/model_a.json");
  const std::string pseudo = slurp(out + "/fold_S1/pseudo_labels.jsonl");
  fs::remove_all(out);
  wsfl::run_loso(cfg);
  EXPECT_EQ(slurp(out + "/report.csv"), report_csv);
  EXPECT_EQ(slurp(out + "/folds.json"), folds);
  EXPECT_EQ(slurp(out + "/fold_S1/model_a.json"), model_a);
  EXPECT_EQ(slurp(out + "/fold_S1/pseudo_labels.jsonl"), pseudo);
}

TEST(RunLoso, SeedChangesResults) {
  const std::string out_a = std::string(::testing::TempDir()) + "loso_seed_a";
  const std::string out_b = std::string(::testing::TempDir()) + "loso_seed_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  wsfl::run_loso(small_config(out_a, 7));
  wsfl::run_loso(small_config(out_b, 8));
  EXPECT_NE(slurp(out_a + "/fold_S1/model_a.json"), slurp(out_b + "/fold_S1/model_a.json"));
}

TEST(RunLoso, TrueVideoLabelBypassWorks) {
  const std::string out = std::string(::testing::TempDir()) + "loso_bypass";
  fs::remove_all(out);
  auto cfg = small_config(out);
  cfg.use_true_video_labels = true;
  const auto report = wsfl::run_loso(cfg);
  for (const auto& f : report.folds) EXPECT_FALSE(f.error.has_value()) << f.error.value_or("");
}

TEST(RunLoso, FoldFailuresAreContainedNotFatal) {
  // calibration requires reference frame labels; strip them so every fold
  // fails, and check the run still completes with errors recorded
  auto cfg = small_config(std::string(::testing::TempDir()) + "loso_failures");
  fs::remove_all(cfg.out_dir);
  wsfl::Dataset ds = wsfl::generate_synthetic(*cfg.synth);
  for (auto& v : ds.videos) v.frame_labels.reset();
  const auto report = wsfl::run_loso(cfg, &ds);
  ASSERT_EQ(report.folds.size(), 3u);
  EXPECT_EQ(report.fold_failures.size(), 3u);
  for (const auto& f : report.folds) {
    ASSERT_TRUE(f.error.has_value());
    EXPECT_NE(f.error->find("calibrate"), std::string::npos);
  }
  EXPECT_TRUE(fs::exists(cfg.out_dir + "/folds.json"));
}

TEST(RunLoso, ParallelFoldsMatchSerial) {
  const std::string out_serial = std::string(::testing::TempDir()) + "loso_serial";
  const std::string out_par = std::string(::testing::TempDir()) + "loso_parallel";
  fs::remove_all(out_serial);
  fs::remove_all(out_par);
  auto cfg = small_config(out_serial);
  wsfl::run_loso(cfg);
  cfg.out_dir = out_par;
  cfg.jobs = 3;
  wsfl::run_loso(cfg);
  EXPECT_EQ(slurp(out_serial + "/report.csv"), slurp(out_par + "/report.csv"));
  // folds.json echoes the config including out_dir, so normalize that field
  auto folds_without_out_dir = [](const std::string& path) {
    auto j = nlohmann::json::parse(slurp(path));
    for (auto& fold : j) {
      fold["config_echo"].erase("out_dir");
      fold["config_echo"].erase("jobs");
    }
    return j;
  };
  EXPECT_EQ(folds_without_out_dir(out_serial + "/folds.json"),
            folds_without_out_dir(out_par + "/folds.json"));
}

TEST(StageIsolation, CheckpointedStagesReproduceTheMonolithicFold) {
  // run one fold end to end, then rebuild it stage by stage with every
  // intermediate product round-tripped through its on-disk format
  const std::string out = std::string(::testing::TempDir()) + "stage_iso";
  fs::remove_all(out);
  fs::create_directories(out);
  const auto cfg = small_config(out);
  const wsfl::Dataset ds = wsfl::generate_synthetic(*cfg.synth);
  const auto splits = wsfl::loso_splits(ds);
  const auto& split = splits[1];
  const std::uint64_t fold_seed = wsfl::pipeline::mix_seed(cfg.seed, 1);
  const std::size_t max_len = ds.max_length();

  const wsfl::FoldResult direct = wsfl::run_fold(split, cfg, fold_seed, max_len);

  namespace pl = wsfl::pipeline;
  const auto features = pl::preprocess_all(split.train);
  auto model_a_mem = pl::train_model_a(split.train, features, cfg, fold_seed, max_len);
  wsfl::save_video_checkpoint(*model_a_mem, out + "/a.json");
  model_a_mem.reset();
  const auto model_a = wsfl::load_video_checkpoint(out + "/a.json");

  const auto preds = pl::predict_video_labels(*model_a, features, cfg.decision_threshold);
  const auto scores = pl::score_videos(*model_a, features, preds, cfg);
  const auto calib = pl::calibrate(split.train, scores, preds, cfg);
  auto pseudo = pl::assemble_pseudo_dataset(features, scores, preds, calib.spec);
  wsfl::save_pseudo_labels(pseudo.per_video, out + "/pl.jsonl");
  const auto reloaded_labels = wsfl::load_pseudo_labels(out + "/pl.jsonl");
  ASSERT_EQ(reloaded_labels.size(), pseudo.per_video.size());
  for (std::size_t i = 0; i < reloaded_labels.size(); ++i) {
    EXPECT_EQ(reloaded_labels[i].labels, pseudo.per_video[i].labels);
    EXPECT_EQ(reloaded_labels[i].used, pseudo.per_video[i].used);
  }

  wsfl::FrameClassifier model_b_mem = pl::train_model_b(pseudo.frames, pseudo.labels, cfg,
                                                        fold_seed, 21);
  wsfl::save_frame_checkpoint(model_b_mem, out + "/b.json");
  const wsfl::FrameClassifier model_b = wsfl::load_frame_checkpoint(out + "/b.json");

  wsfl::Tensor gt_frames;
  std::vector<int> gt_labels;
  pl::ground_truth_frames(split.train, features, gt_frames, gt_labels);
  wsfl::FrameClassifier model_b_gt = pl::train_model_b(gt_frames, gt_labels, cfg, fold_seed, 31);

  const wsfl::FoldResult staged =
      pl::evaluate_fold(split, *model_a, &model_b, &model_b_gt, cfg);

  EXPECT_EQ(staged.video_auc, direct.video_auc);  // bit-identical metrics
  EXPECT_EQ(staged.frame_auc, direct.frame_auc);
  EXPECT_EQ(staged.frame_auc_ground_truth, direct.frame_auc_ground_truth);
  EXPECT_EQ(staged.baseline_frame_auc, direct.baseline_frame_auc);
  EXPECT_EQ(staged.frame_counts.tp, direct.frame_counts.tp);
  EXPECT_EQ(staged.frame_counts.fp, direct.frame_counts.fp);
  EXPECT_EQ(staged.frame_counts.tn, direct.frame_counts.tn);
  EXPECT_EQ(staged.frame_counts.fn, direct.frame_counts.fn);
}

TEST(RunGrid, RanksConfigurationsAndFlagsBestPerCell) {
  const std::string out = std::string(::testing::TempDir()) + "grid_out";
  fs::remove_all(out);
  auto a = small_config(out + "/unused_a");
  a.train_a.learning_rate = 1e-3;
  auto b = small_config(out + "/unused_b");
  b.train_a.learning_rate = 1e-4;
  const auto rows = wsfl::run_grid({a, b}, out);
  ASSERT_EQ(rows.size(), 2u);
  std::size_t best = 0;
  for (const auto& r : rows) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    EXPECT_EQ(r.model, "temporal_attention");
    best += r.best_in_cell;
    EXPECT_TRUE(fs::exists(out + "/config_" + std::to_string(r.config_index) + "/report.csv"));
  }
  EXPECT_EQ(best, 1u);  // both configs land in the same cell, one winner
  EXPECT_TRUE(fs::exists(out + "/grid_summary.csv"));
  EXPECT_THROW(wsfl::run_grid({}, out), std::invalid_argument);
}

TEST(ResolveHelpers, DatasetAndOutDir) {
  wsfl::RunConfig cfg;
  EXPECT_THROW(wsfl::resolve_dataset(cfg), std::invalid_argument);
  cfg.synth = wsfl::SynthConfig{};
  cfg.synth->n_subjects = 2;
  cfg.synth->trials_per_subject = 1;
  cfg.synth->frames = 5;
  EXPECT_EQ(wsfl::resolve_dataset(cfg).videos.size(), 2u);
  cfg.out_dir = "somewhere";
  EXPECT_EQ(wsfl::resolve_out_dir(cfg), "somewhere");
}

}  // namespace
