#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wsfl/preprocess.hpp"

namespace {

wsfl::PoseSequence make_seq(const std::vector<std::vector<double>>& frames,
                            std::size_t joints = 1) {
  wsfl::PoseSequence s;
  s.video_id = "v";
  s.subject_id = "s";
  s.exercise_id = "e";
  s.joints = joints;
  s.frames = frames;
  return s;
}

wsfl::PoseSequence random_seq(std::mt19937_64& rng, std::size_t t, std::size_t joints) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> frames(t, std::vector<double>(joints * 3));
  for (auto& f : frames)
    for (auto& v : f) v = g(rng);
  return make_seq(frames, joints);
}

TEST(Offset, FirstFrameBecomesZeroAndDifferencesPreserved) {
  const auto s = make_seq({{1.0, 2.0, 3.0}, {1.5, 2.0, 2.0}, {0.0, 0.0, 9.0}});
  const auto o = wsfl::offset_by_initial(s);
  EXPECT_EQ(o.frames[0], (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(o.frames[1], (std::vector<double>{0.5, 0.0, -1.0}));
  EXPECT_EQ(o.frames[2], (std::vector<double>{-1.0, -2.0, 6.0}));
  // idempotent: offsetting an already-offset sequence changes nothing
  const auto o2 = wsfl::offset_by_initial(o);
  EXPECT_EQ(o.frames, o2.frames);
}

TEST(Offset, TranslationInvariance) {
  std::mt19937_64 rng(5);
  const auto s = random_seq(rng, 9, 2);
  auto shifted = s;
  for (auto& f : shifted.frames)
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += 3.25;
  const auto a = wsfl::offset_by_initial(s);
  const auto b = wsfl::offset_by_initial(shifted);
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    for (std::size_t i = 0; i < a.frames[t].size(); ++i)
      EXPECT_NEAR(a.frames[t][i], b.frames[t][i], 1e-12);
}

TEST(MovingAverage, TrailingWindowHandComputed) {
  // x = [0,1,2,3,4], window 3: prefixes first, then full windows
  const auto s = make_seq({{0.0, 0.0, 0.0},
                           {1.0, 0.0, 0.0},
                           {2.0, 0.0, 0.0},
                           {3.0, 0.0, 0.0},
                           {4.0, 0.0, 0.0}});
  const auto m = wsfl::moving_average(s, 3);
  const std::vector<double> want = {0.0, 0.5, 1.0, 2.0, 3.0};
  for (std::size_t t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ(m.frames[t][0], want[t]);
  EXPECT_EQ(m.frames.size(), s.frames.size());
}

TEST(MovingAverage, ConstantSignalUnchangedExactly) {
  const auto s = make_seq(std::vector<std::vector<double>>(17, {0.3, -1.7, 2.5}));
  const auto m = wsfl::moving_average(s, 5);
  for (const auto& f : m.frames) {
    EXPECT_EQ(f[0], 0.3);
    EXPECT_EQ(f[1], -1.7);
    EXPECT_EQ(f[2], 2.5);
  }
}

TEST(MovingAverage, WindowOneIsIdentityAndZeroThrows) {
  std::mt19937_64 rng(2);
  const auto s = random_seq(rng, 6, 1);
  EXPECT_EQ(wsfl::moving_average(s, 1).frames, s.frames);
  EXPECT_THROW(wsfl::moving_average(s, 0), std::invalid_argument);
}

TEST(MovingAverage, MatchesBruteForceOracle) {
  std::mt19937_64 rng(31);
  for (std::size_t window : {2u, 4u, 5u, 9u}) {
    const auto s = random_seq(rng, 25, 3);
    const auto m = wsfl::moving_average(s, window);
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
      for (std::size_t i = 0; i < s.frames[t].size(); ++i) {
        double acc = 0.0;
        for (std::size_t k = lo; k <= t; ++k) acc += s.frames[k][i];
        EXPECT_NEAR(m.frames[t][i], acc / static_cast<double>(t - lo + 1), 1e-13);
      }
    }
  }
}

TEST(MovingAverage, Linearity) {
  // avg(a*x + b*y) == a*avg(x) + b*avg(y), to tight tolerance
  std::mt19937_64 rng(77);
  const auto x = random_seq(rng, 20, 2);
  const auto y = random_seq(rng, 20, 2);
  const double a = 1.75, b = -0.5;
  auto combo = x;
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t i = 0; i < combo.frames[t].size(); ++i)
      combo.frames[t][i] = a * x.frames[t][i] + b * y.frames[t][i];
  const auto mc = wsfl::moving_average(combo, 5);
  const auto mx = wsfl::moving_average(x, 5);
  const auto my = wsfl::moving_average(y, 5);
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t i = 0; i < mc.frames[t].size(); ++i)
      EXPECT_NEAR(mc.frames[t][i], a * mx.frames[t][i] + b * my.frames[t][i], 1e-12);
}

TEST(Features, ShapeIsTByThreeJ) {
  wsfl::SynthConfig cfg;
  cfg.n_subjects = 1;
  cfg.trials_per_subject = 1;
  cfg.frames = 23;
  cfg.seed = 4;
  const auto ds = wsfl::generate_synthetic(cfg);
  const auto f = wsfl::to_features(ds.videos[0].sequence);
  EXPECT_EQ(f.length(), 23u);
  EXPECT_EQ(f.dim(), wsfl::kMediaPipeJoints * 3);  // 99 for the full marker set
  EXPECT_EQ(f.video_id, ds.videos[0].sequence.video_id);
  EXPECT_TRUE(f.features.all_finite());
  // frame 0 is smoothed(offset)[0] = offset[0] = zeros
  for (std::size_t i = 0; i < f.dim(); ++i) EXPECT_EQ(f.features(0, i), 0.0);
}

TEST(Features, EqualsSmoothedOffsetComposition) {
  std::mt19937_64 rng(13);
  const auto s = random_seq(rng, 14, 4);
  const auto f = wsfl::to_features(s, 5);
  const auto manual = wsfl::moving_average(wsfl::offset_by_initial(s), 5);
  for (std::size_t t = 0; t < 14; ++t)
    for (std::size_t i = 0; i < 12; ++i)
      EXPECT_EQ(f.features(t, i), manual.frames[t][i]);
}

}  // namespace
