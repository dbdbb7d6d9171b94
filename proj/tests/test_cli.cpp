#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wsfl/dataset.hpp"
#include "wsfl/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() { return WSFL_CLI_PATH; }

struct CommandResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

CommandResult run(const std::string& args) {
  const std::string dir = ::testing::TempDir();
  const std::string out_file = dir + "cli_stdout.txt";
  const std::string err_file = dir + "cli_stderr.txt";
  const int status =
      std::system((cli() + " " + args + " >" + out_file + " 2>" + err_file).c_str());
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  return {WEXITSTATUS(status), slurp(out_file), slurp(err_file)};
}

class CliFlow : public ::testing::Test {
 protected:
  // one shared workspace: synth config, run config, generated dataset
  static void SetUpTestSuite() {
    dir_ = new std::string(std::string(::testing::TempDir()) + "cli_flow/");
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);

    json synth = {{"n_subjects", 3}, {"trials_per_subject", 4}, {"frames", 20},
                  {"compensation_rate", 0.5}, {"seed", 17}};
    std::ofstream(*dir_ + "synth.json") << synth.dump(2);

    json cfg;
    cfg["seed"] = 7;
    cfg["dataset"] = {{"path", *dir_ + "data.jsonl"}};
    cfg["model_a"] = {{"variant", "temporal_attention"}, {"embed_dim", 8}};
    cfg["train_a"] = {{"learning_rate", 1e-3}, {"batch_size", 16}, {"max_epochs", 6},
                      {"early_stop_patience", 6}};
    cfg["train_b"] = {{"learning_rate", 1e-3}, {"batch_size", 32}, {"max_epochs", 6},
                      {"early_stop_patience", 6}};
    cfg["saliency"] = {{"method", "ig"}, {"steps", 4}};
    cfg["threshold"] = {{"mode", "single"}, {"calibrate", true}};
    cfg["ground_truth_condition"] = true;
    std::ofstream(*dir_ + "config.json") << cfg.dump(2);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string* dir_;
};

std::string* CliFlow::dir_ = nullptr;

TEST_F(CliFlow, Step1SynthWritesLoadableDataset) {
  const auto r = run("synth --config " + *dir_ + "synth.json --out " + *dir_ + "data.jsonl");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto ds = wsfl::load_dataset(*dir_ + "data.jsonl");
  EXPECT_EQ(ds.videos.size(), 12u);
  EXPECT_EQ(ds.subjects().size(), 3u);
}

TEST_F(CliFlow, Step2StageByStageFoldMatchesMonolithicRun) {
  const std::string cfg = " --config " + *dir_ + "config.json";
  const std::string fold = " --data " + *dir_ + "data.jsonl --hold-out S1";
  const std::string stage_dir = *dir_ + "stage";

  auto r = run("train-video" + cfg + fold + " --out " + stage_dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  ASSERT_TRUE(fs::exists(stage_dir + "/model_a.json"));

  r = run("saliency" + cfg + fold + " --model-a " + stage_dir + "/model_a.json --out " +
          stage_dir + "/saliency");
  ASSERT_EQ(r.exit_code, 0) << r.err;

  r = run("pseudolabel" + cfg + fold + " --model-a " + stage_dir + "/model_a.json --out " +
          stage_dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  ASSERT_TRUE(fs::exists(stage_dir + "/pseudo_labels.jsonl"));
  ASSERT_TRUE(fs::exists(stage_dir + "/thresholds.json"));

  r = run("train-frame" + cfg + fold + " --pseudo " + stage_dir + "/pseudo_labels.jsonl" +
          " --out " + stage_dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run("train-frame" + cfg + fold + " --ground-truth --out " + stage_dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;

  r = run("report" + cfg + fold + " --model-a " + stage_dir + "/model_a.json --model-b " +
          stage_dir + "/model_b.json --model-b-gt " + stage_dir + "/model_b_gt.json --out " +
          stage_dir + "/fold_result.json");
  ASSERT_EQ(r.exit_code, 0) << r.err;

  r = run("loso" + cfg + " --out " + *dir_ + "loso");
  ASSERT_EQ(r.exit_code, 0) << r.err;

  std::ifstream staged_in(stage_dir + "/fold_result.json");
  std::ifstream mono_in(*dir_ + "loso/fold_S1/fold_result.json");
  ASSERT_TRUE(staged_in.good());
  ASSERT_TRUE(mono_in.good());
  const json staged = json::parse(staged_in);
  const json mono = json::parse(mono_in);
  // the staged pipeline must reproduce the monolithic fold bit for bit
  for (const char* key : {"video_auc", "frame_auc", "frame_auc_ground_truth",
                          "baseline_frame_auc", "frame_counts", "held_out_subject",
                          "model_variant", "saliency_method", "threshold_mode"})
    EXPECT_EQ(staged.at(key), mono.at(key)) << key;

  // saliency exports exist for at least one predicted-positive video
  bool any_tsv = false;
  for (const auto& e : fs::directory_iterator(stage_dir + "/saliency"))
    any_tsv |= e.path().extension() == ".tsv";
  EXPECT_TRUE(any_tsv);
}

TEST_F(CliFlow, Step3AggregateReportFromFoldResults) {
  auto r = run("report --config " + *dir_ + "config.json --in " + *dir_ + "loso");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("Video-level AUC"), std::string::npos);
  EXPECT_NE(r.out.find("temporal_attention"), std::string::npos);

  r = run("report --config " + *dir_ + "config.json --in " + *dir_ + "loso --format csv");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("table,model,method,threshold_mode,mean,std,n_folds,n_excluded"),
            std::string::npos);
  // three folds aggregated
  EXPECT_NE(r.out.find(",3,"), std::string::npos);
}

TEST(CliErrors, FailuresAreSingleLineJsonOnStderr) {
  const std::string dir = std::string(::testing::TempDir()) + "cli_err/";
  fs::create_directories(dir);

  // dataset with one subject: LOSO is impossible
  wsfl::SynthConfig sc;
  sc.n_subjects = 1;
  sc.trials_per_subject = 2;
  sc.frames = 8;
  wsfl::save_dataset(wsfl::generate_synthetic(sc), dir + "one.jsonl");
  json cfg;
  cfg["seed"] = 1;
  cfg["dataset"] = {{"path", dir + "one.jsonl"}};
  std::ofstream(dir + "cfg.json") << cfg.dump();

  auto r = run("loso --config " + dir + "cfg.json --out " + dir + "loso");
  EXPECT_NE(r.exit_code, 0);
  const json err = json::parse(r.err);  // must be machine-readable
  EXPECT_NE(err.at("error").get<std::string>().find("subject"), std::string::npos);

  // unknown hold-out subject
  r = run("train-video --config " + dir + "cfg.json --data " + dir + "one.jsonl" +
          " --hold-out NOPE --out " + dir);
  EXPECT_NE(r.exit_code, 0);
  EXPECT_FALSE(json::parse(r.err).at("error").get<std::string>().empty());

  // missing config file
  r = run("loso --config " + dir + "missing.json");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_FALSE(json::parse(r.err).at("error").get<std::string>().empty());

  // bad command line: unknown subcommand is reported by the parser, not JSON
  r = run("frobnicate");
  EXPECT_NE(r.exit_code, 0);
}

}  // namespace
