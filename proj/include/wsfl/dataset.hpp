#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace wsfl {

inline constexpr const char* kDatasetSchemaVersion = "1";
inline constexpr std::size_t kMediaPipeJoints = 33;

/// One motion trial: T frames of J joints in real-world 3D coordinates (m).
struct PoseSequence {
  std::string video_id;
  std::string subject_id;
  std::string exercise_id;
  double fps = 30.0;
  std::size_t joints = kMediaPipeJoints;
  // frames[t][j*3 + c], row-major T × J × 3
  std::vector<std::vector<double>> frames;

  std::size_t length() const { return frames.size(); }

  void validate() const {
    if (frames.size() < 2) throw std::invalid_argument("PoseSequence: T must be >= 2");
    if (fps <= 0.0) throw std::invalid_argument("PoseSequence: fps must be positive");
    for (const auto& f : frames) {
      if (f.size() != joints * 3)
        throw std::invalid_argument("PoseSequence: frame with wrong joint count in " + video_id);
      for (double v : f)
        if (!std::isfinite(v))
          throw std::invalid_argument("PoseSequence: non-finite coordinate in " + video_id);
    }
  }
};

struct LabeledVideo {
  PoseSequence sequence;
  int video_label = 0;  // 0 normal, 1 compensatory
  std::optional<std::vector<int>> frame_labels;

  void validate() const {
    sequence.validate();
    if (video_label != 0 && video_label != 1)
      throw std::invalid_argument("LabeledVideo: video_label must be 0 or 1");
    if (frame_labels) {
      if (frame_labels->size() != sequence.length())
        throw std::invalid_argument("LabeledVideo: frame_labels length mismatch in " +
                                    sequence.video_id);
      bool any_one = false;
      for (int z : *frame_labels) {
        if (z != 0 && z != 1)
          throw std::invalid_argument("LabeledVideo: frame label must be 0 or 1");
        any_one = any_one || z == 1;
      }
      if (video_label == 0 && any_one)
        throw std::invalid_argument("LabeledVideo: normal video with positive frame label in " +
                                    sequence.video_id);
      if (video_label == 1 && !any_one)
        throw std::invalid_argument(
            "LabeledVideo: compensatory video without positive frame label in " +
            sequence.video_id);
    }
  }
};

struct Dataset {
  std::vector<LabeledVideo> videos;
  std::string schema_version = kDatasetSchemaVersion;

  std::size_t max_length() const {
    std::size_t t = 0;
    for (const auto& v : videos) t = std::max(t, v.sequence.length());
    return t;
  }

  std::vector<std::string> subjects() const {
    std::set<std::string> s;
    for (const auto& v : videos) s.insert(v.sequence.subject_id);
    return {s.begin(), s.end()};
  }

  void validate() const {
    std::set<std::string> ids;
    std::optional<std::size_t> joints;
    for (const auto& v : videos) {
      v.validate();
      if (!ids.insert(v.sequence.video_id).second)
        throw std::invalid_argument("Dataset: duplicate video_id " + v.sequence.video_id);
      if (joints && *joints != v.sequence.joints)
        throw std::invalid_argument("Dataset: inconsistent joint count in " +
                                    v.sequence.video_id);
      joints = v.sequence.joints;
    }
  }
};

enum class Archetype { ShoulderElevation, TrunkFlexion, HeadFlexion };

inline std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::ShoulderElevation: return "shoulder_elevation";
    case Archetype::TrunkFlexion: return "trunk_flexion";
    case Archetype::HeadFlexion: return "head_flexion";
  }
  throw std::logic_error("unknown archetype");
}

inline Archetype archetype_from_string(const std::string& s) {
  if (s == "shoulder_elevation") return Archetype::ShoulderElevation;
  if (s == "trunk_flexion") return Archetype::TrunkFlexion;
  if (s == "head_flexion") return Archetype::HeadFlexion;
  throw std::invalid_argument("unknown archetype: " + s);
}

struct SynthConfig {
  std::size_t n_subjects = 12;
  std::size_t trials_per_subject = 20;
  std::size_t frames = 150;  // T per trial
  double compensation_rate = 0.5;
  std::vector<Archetype> archetypes = {Archetype::ShoulderElevation, Archetype::TrunkFlexion,
                                       Archetype::HeadFlexion};
  std::pair<double, double> segment_fraction = {0.25, 0.6};
  std::pair<double, double> amplitude = {0.06, 0.15};  // meters
  double noise_std = 0.005;                            // meters
  std::uint64_t seed = 0;

  void validate() const {
    if (n_subjects == 0 || trials_per_subject == 0 || frames < 2)
      throw std::invalid_argument("SynthConfig: counts must be positive, T >= 2");
    if (compensation_rate < 0.0 || compensation_rate > 1.0)
      throw std::invalid_argument("SynthConfig: compensation_rate outside [0,1]");
    if (archetypes.empty()) throw std::invalid_argument("SynthConfig: no archetypes");
    auto [f0, f1] = segment_fraction;
    if (!(f0 > 0.0 && f0 <= 1.0 && f1 > 0.0 && f1 <= 1.0 && f0 <= f1))
      throw std::invalid_argument("SynthConfig: segment_fraction bounds must be in (0,1], min <= max");
    if (amplitude.first > amplitude.second)
      throw std::invalid_argument("SynthConfig: amplitude min > max");
    if (noise_std < 0.0) throw std::invalid_argument("SynthConfig: negative noise_std");
  }
};

inline nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json j;
  j["n_subjects"] = c.n_subjects;
  j["trials_per_subject"] = c.trials_per_subject;
  j["frames"] = c.frames;
  j["compensation_rate"] = c.compensation_rate;
  nlohmann::json arch = nlohmann::json::array();
  for (auto a : c.archetypes) arch.push_back(to_string(a));
  j["archetypes"] = arch;
  j["segment_fraction"] = {c.segment_fraction.first, c.segment_fraction.second};
  j["amplitude"] = {c.amplitude.first, c.amplitude.second};
  j["noise_std"] = c.noise_std;
  j["seed"] = c.seed;
  return j;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.n_subjects = j.value("n_subjects", c.n_subjects);
  c.trials_per_subject = j.value("trials_per_subject", c.trials_per_subject);
  c.frames = j.value("frames", c.frames);
  c.compensation_rate = j.value("compensation_rate", c.compensation_rate);
  if (j.contains("archetypes")) {
    c.archetypes.clear();
    for (const auto& a : j.at("archetypes"))
      c.archetypes.push_back(archetype_from_string(a.get<std::string>()));
  }
  if (j.contains("segment_fraction")) {
    c.segment_fraction = {j.at("segment_fraction").at(0).get<double>(),
                          j.at("segment_fraction").at(1).get<double>()};
  }
  if (j.contains("amplitude"))
    c.amplitude = {j.at("amplitude").at(0).get<double>(),
                   j.at("amplitude").at(1).get<double>()};
  c.noise_std = j.value("noise_std", c.noise_std);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// JSONL serialization

inline nlohmann::json to_json(const LabeledVideo& v) {
  nlohmann::json rec;
  rec["video_id"] = v.sequence.video_id;
  rec["subject_id"] = v.sequence.subject_id;
  rec["exercise_id"] = v.sequence.exercise_id;
  rec["fps"] = v.sequence.fps;
  rec["video_label"] = v.video_label;
  if (v.frame_labels) rec["frame_labels"] = *v.frame_labels;
  auto& frames = rec["frames"] = nlohmann::json::array();
  for (const auto& f : v.sequence.frames) {
    nlohmann::json frame = nlohmann::json::array();
    for (std::size_t j = 0; j + 2 < f.size(); j += 3)
      frame.push_back({f[j], f[j + 1], f[j + 2]});
    frames.push_back(std::move(frame));
  }
  return rec;
}

inline LabeledVideo video_from_json(const nlohmann::json& rec) {
  for (const char* field : {"video_id", "subject_id", "exercise_id", "fps", "video_label", "frames"})
    if (!rec.contains(field))
      throw std::invalid_argument(std::string("missing field `") + field + "`");
  LabeledVideo v;
  v.sequence.video_id = rec.at("video_id").get<std::string>();
  v.sequence.subject_id = rec.at("subject_id").get<std::string>();
  v.sequence.exercise_id = rec.at("exercise_id").get<std::string>();
  v.sequence.fps = rec.at("fps").get<double>();
  v.video_label = rec.at("video_label").get<int>();
  const auto& frames = rec.at("frames");
  if (!frames.is_array() || frames.empty())
    throw std::invalid_argument("field `frames` must be a non-empty array");
  v.sequence.joints = frames.front().size();
  for (const auto& frame : frames) {
    std::vector<double> flat;
    flat.reserve(frame.size() * 3);
    for (const auto& joint : frame) {
      if (!joint.is_array() || joint.size() != 3)
        throw std::invalid_argument("joint entry must be an [x,y,z] triple");
      for (const auto& c : joint) flat.push_back(c.get<double>());
    }
    v.sequence.frames.push_back(std::move(flat));
  }
  if (rec.contains("frame_labels"))
    v.frame_labels = rec.at("frame_labels").get<std::vector<int>>();
  return v;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  nlohmann::json header;
  header["schema_version"] = ds.schema_version;
  header["n_videos"] = ds.videos.size();
  out << header.dump() << '\n';
  for (const auto& v : ds.videos) out << to_json(v).dump() << '\n';
  if (!out) throw std::runtime_error("save_dataset: write failure on " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("load_dataset: " + path + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
    if (!header_seen) {
      header_seen = true;
      if (rec.contains("schema_version")) {
        ds.schema_version = rec.at("schema_version").get<std::string>();
        continue;
      }
    }
    try {
      ds.videos.push_back(video_from_json(rec));
    } catch (const std::exception& e) {
      throw std::runtime_error("load_dataset: " + path + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace synth_detail {

// MediaPipe topology subsets each archetype displaces.
inline const std::vector<std::size_t>& archetype_joints(Archetype a) {
  static const std::vector<std::size_t> shoulder = {11, 12};
  static const std::vector<std::size_t> trunk = {11, 12, 23, 24};
  static const std::vector<std::size_t> head = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  switch (a) {
    case Archetype::ShoulderElevation: return shoulder;
    case Archetype::TrunkFlexion: return trunk;
    case Archetype::HeadFlexion: return head;
  }
  throw std::logic_error("unknown archetype");
}

// Displacement direction per archetype: shoulders rise (+y), trunk pitches
// forward (+z), head tips forward/down (-y, +z).
inline void archetype_direction(Archetype a, double& dx, double& dy, double& dz) {
  dx = 0.0;
  switch (a) {
    case Archetype::ShoulderElevation: dy = 1.0; dz = 0.0; break;
    case Archetype::TrunkFlexion: dy = 0.0; dz = 1.0; break;
    case Archetype::HeadFlexion: dy = -0.7; dz = 0.7; break;
  }
}

// Plateaued envelope over [0,1]: ramps over the outer 15% of the segment.
inline double segment_envelope(double u) {
  constexpr double ramp = 0.15;
  if (u < ramp) return 0.5 - 0.5 * std::cos(M_PI * u / ramp);
  if (u > 1.0 - ramp) return 0.5 - 0.5 * std::cos(M_PI * (1.0 - u) / ramp);
  return 1.0;
}

// Reach-arm joint chain animated by the base motion (right arm + hands).
inline const std::vector<std::size_t>& reach_joints() {
  static const std::vector<std::size_t> chain = {12, 14, 16, 18, 20, 22};
  return chain;
}

}  // namespace synth_detail

/// Deterministic synthetic dataset with ground-truth frame labels: a smooth
/// periodic reach per subject, with archetype displacement injected over one
/// contiguous segment in compensatory trials.
inline Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Neutral seated pose: coarse joint placements, constant per joint.
  std::vector<double> rest(kMediaPipeJoints * 3, 0.0);
  for (std::size_t j = 0; j < kMediaPipeJoints; ++j) {
    rest[j * 3 + 0] = (j % 2 == 0 ? -0.15 : 0.15);
    rest[j * 3 + 1] = j <= 10 ? 0.6 : (j <= 22 ? 0.3 : -0.2);
    rest[j * 3 + 2] = 0.0;
  }

  Dataset ds;
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    const std::string subject = "S" + std::to_string(s + 1);
    // Subject-specific reach style: 1-3 sinusoids per animated coordinate.
    const std::size_t n_harmonics = 1 + rng() % 3;
    struct Harmonic { double amp, freq, phase; };
    std::map<std::size_t, std::vector<Harmonic>> reach;
    for (std::size_t j : synth_detail::reach_joints()) {
      auto& hs = reach[j];
      for (std::size_t h = 0; h < n_harmonics; ++h)
        hs.push_back({(0.15 + 0.15 * unit(rng)) / static_cast<double>(h + 1),
                      (1.0 + static_cast<double>(h)) * (2.0 + 2.0 * unit(rng)),
                      2.0 * M_PI * unit(rng)});
    }

    for (std::size_t trial = 0; trial < cfg.trials_per_subject; ++trial) {
      LabeledVideo v;
      v.sequence.video_id = subject + "_T" + std::to_string(trial + 1);
      v.sequence.subject_id = subject;
      v.sequence.exercise_id = "SYN" + std::to_string(trial % 5 + 1);
      v.sequence.fps = 30.0;
      v.sequence.joints = kMediaPipeJoints;

      const bool compensatory = unit(rng) < cfg.compensation_rate;
      std::size_t seg_begin = 0, seg_end = 0;  // [begin, end)
      Archetype arch = cfg.archetypes.front();
      double arch_amp = 0.0;
      if (compensatory) {
        arch = cfg.archetypes[rng() % cfg.archetypes.size()];
        const double frac = cfg.segment_fraction.first +
                            (cfg.segment_fraction.second - cfg.segment_fraction.first) * unit(rng);
        std::size_t seg_len =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * cfg.frames)));
        seg_len = std::min(seg_len, cfg.frames);
        seg_begin = (cfg.frames == seg_len)
                        ? 0
                        : static_cast<std::size_t>(unit(rng) * (cfg.frames - seg_len));
        seg_end = seg_begin + seg_len;
        arch_amp = cfg.amplitude.first +
                   (cfg.amplitude.second - cfg.amplitude.first) * unit(rng);
      }

      double ddx, ddy, ddz;
      synth_detail::archetype_direction(arch, ddx, ddy, ddz);
      const auto& arch_joints = synth_detail::archetype_joints(arch);

      std::vector<int> labels(cfg.frames, 0);
      for (std::size_t t = 0; t < cfg.frames; ++t) {
        std::vector<double> frame = rest;
        const double phase_t = static_cast<double>(t) / static_cast<double>(cfg.frames);
        for (const auto& [j, hs] : reach)
          for (const auto& h : hs) {
            frame[j * 3 + 1] += h.amp * std::sin(2.0 * M_PI * h.freq * phase_t + h.phase);
            frame[j * 3 + 2] += 0.5 * h.amp * std::cos(2.0 * M_PI * h.freq * phase_t + h.phase);
          }
        if (compensatory && t >= seg_begin && t < seg_end) {
          labels[t] = 1;
          const double u = (static_cast<double>(t - seg_begin) + 0.5) /
                           static_cast<double>(seg_end - seg_begin);
          const double a = arch_amp * synth_detail::segment_envelope(u);
          for (std::size_t j : arch_joints) {
            frame[j * 3 + 0] += a * ddx;
            frame[j * 3 + 1] += a * ddy;
            frame[j * 3 + 2] += a * ddz;
          }
        }
        if (cfg.noise_std > 0.0)
          for (auto& c : frame) c += cfg.noise_std * gauss(rng);
        v.sequence.frames.push_back(std::move(frame));
      }
      v.video_label = compensatory ? 1 : 0;
      v.frame_labels = std::move(labels);
      ds.videos.push_back(std::move(v));
    }
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Leave-One-Subject-Out

struct LosoSplit {
  std::string held_out_subject;
  Dataset train;
  Dataset test;
};

inline std::vector<LosoSplit> loso_splits(const Dataset& ds) {
  const auto subjects = ds.subjects();
  if (subjects.size() < 2)
    throw std::invalid_argument("loso_splits: fewer than 2 subjects");
  std::vector<LosoSplit> splits;
  for (const auto& subject : subjects) {
    LosoSplit split;
    split.held_out_subject = subject;
    for (const auto& v : ds.videos)
      (v.sequence.subject_id == subject ? split.test : split.train).videos.push_back(v);
    splits.push_back(std::move(split));
  }
  return splits;
}

}  // namespace wsfl
