#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace wsfl {

/// Mann-Whitney AUC via ranking with midrank tie handling, O(n log n).
/// Undefined (nullopt) when only one class is present.
inline std::optional<double> auc(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: scores/labels length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += l == 1;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j + 1;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion_counts(const std::vector<int>& labels,
                                        const std::vector<int>& predictions,
                                        const std::vector<bool>* used_mask = nullptr) {
  if (labels.size() != predictions.size() ||
      (used_mask && used_mask->size() != labels.size()))
    throw std::invalid_argument("confusion_counts: length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (used_mask && !(*used_mask)[i]) continue;
    if (labels[i] == 1)
      predictions[i] == 1 ? ++c.tp : ++c.fn;
    else
      predictions[i] == 1 ? ++c.fp : ++c.tn;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Paired t-test

namespace detail_eval {

// Continued-fraction evaluation of the regularized incomplete beta function
// (modified Lentz), accurate to ~1e-14 for the arguments used here.
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double eps = 3e-16, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail_eval

struct TTestResult {
  bool degenerate = false;  // all differences zero or zero variance
  double t = 0.0;
  double p = 1.0;  // two-sided
  std::size_t dof = 0;
};

inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("paired_t_test: need two equal-length samples, n >= 2");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.dof = n - 1;
  if (sd == 0.0) {
    r.degenerate = true;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double nu = static_cast<double>(r.dof);
  r.p = detail_eval::reg_incomplete_beta(nu / 2.0, 0.5, nu / (nu + r.t * r.t));
  return r;
}

// ---------------------------------------------------------------------------
// Fold results and study-level aggregation

struct FoldResult {
  std::string held_out_subject;
  std::optional<double> video_auc;
  std::optional<double> frame_auc;
  std::optional<double> frame_auc_ground_truth;  // Model B trained on true labels
  std::optional<double> baseline_frame_auc;      // video prediction broadcast to frames
  ConfusionCounts frame_counts;
  nlohmann::json config_echo;
  std::string model_variant;
  std::string saliency_method;
  std::string threshold_mode;
  std::optional<std::string> error;  // set when the fold aborted
};

inline nlohmann::json to_json(const FoldResult& f) {
  nlohmann::json j;
  j["held_out_subject"] = f.held_out_subject;
  j["model_variant"] = f.model_variant;
  j["saliency_method"] = f.saliency_method;
  j["threshold_mode"] = f.threshold_mode;
  auto put = [&j](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v; else j[key] = nullptr;
  };
  put("video_auc", f.video_auc);
  put("frame_auc", f.frame_auc);
  put("frame_auc_ground_truth", f.frame_auc_ground_truth);
  put("baseline_frame_auc", f.baseline_frame_auc);
  j["frame_counts"] = {{"tp", f.frame_counts.tp}, {"fp", f.frame_counts.fp},
                       {"tn", f.frame_counts.tn}, {"fn", f.frame_counts.fn}};
  j["config_echo"] = f.config_echo;
  if (f.error) j["error"] = *f.error;
  return j;
}

inline FoldResult fold_result_from_json(const nlohmann::json& j) {
  FoldResult f;
  f.held_out_subject = j.at("held_out_subject").get<std::string>();
  f.model_variant = j.value("model_variant", "");
  f.saliency_method = j.value("saliency_method", "");
  f.threshold_mode = j.value("threshold_mode", "");
  auto get = [&j](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  f.video_auc = get("video_auc");
  f.frame_auc = get("frame_auc");
  f.frame_auc_ground_truth = get("frame_auc_ground_truth");
  f.baseline_frame_auc = get("baseline_frame_auc");
  if (j.contains("frame_counts")) {
    const auto& c = j.at("frame_counts");
    f.frame_counts = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                      c.at("tn").get<std::size_t>(), c.at("fn").get<std::size_t>()};
  }
  if (j.contains("config_echo")) f.config_echo = j.at("config_echo");
  if (j.contains("error") && !j.at("error").is_null())
    f.error = j.at("error").get<std::string>();
  return f;
}

struct ReportCell {
  std::string table;  // "video" or "frame"
  std::string model;
  std::string method;          // vg / ig / "-" for video-level
  std::string threshold_mode;  // single / dual / ground_truth / baseline / "-"
  double mean = 0.0;
  double stddev = 0.0;  // population std over folds
  std::size_t n_folds = 0;
  std::size_t n_excluded = 0;  // folds with undefined AUC
};

struct StudyReport {
  std::vector<ReportCell> cells;
  std::vector<FoldResult> folds;
  std::vector<std::string> fold_failures;
};

namespace detail_eval {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

inline void add_cell(StudyReport& report, const std::string& table, const std::string& model,
                     const std::string& method, const std::string& mode,
                     const std::vector<std::optional<double>>& values) {
  std::vector<double> defined;
  for (const auto& v : values)
    if (v) defined.push_back(*v);
  if (defined.empty()) return;
  ReportCell cell;
  cell.table = table;
  cell.model = model;
  cell.method = method;
  cell.threshold_mode = mode;
  std::tie(cell.mean, cell.stddev) = mean_std(defined);
  cell.n_folds = defined.size();
  cell.n_excluded = values.size() - defined.size();
  report.cells.push_back(std::move(cell));
}

}  // namespace detail_eval

/// Aggregate per-fold results into video-level and frame-level tables
/// (mean ± population std over folds; undefined AUCs excluded and counted).
inline StudyReport aggregate_report(const std::vector<FoldResult>& folds) {
  if (folds.empty()) throw std::invalid_argument("aggregate_report: no folds");
  StudyReport report;
  report.folds = folds;
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<const FoldResult*>>
      groups;
  for (const auto& f : folds) {
    if (f.error) {
      report.fold_failures.push_back(f.held_out_subject + ": " + *f.error);
      continue;
    }
    groups[{f.model_variant, f.saliency_method, f.threshold_mode}].push_back(&f);
  }
  for (const auto& [key, fs] : groups) {
    const auto& [model, method, mode] = key;
    auto collect = [&fs](auto member) {
      std::vector<std::optional<double>> vals;
      for (const auto* f : fs) vals.push_back(f->*member);
      return vals;
    };
    detail_eval::add_cell(report, "video", model, "-", "-", collect(&FoldResult::video_auc));
    detail_eval::add_cell(report, "frame", model, method, mode,
                          collect(&FoldResult::frame_auc));
    detail_eval::add_cell(report, "frame", model, method, "ground_truth",
                          collect(&FoldResult::frame_auc_ground_truth));
    detail_eval::add_cell(report, "frame", model, method, "baseline",
                          collect(&FoldResult::baseline_frame_auc));
  }
  return report;
}

inline std::string render_report_text(const StudyReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "Video-level AUC (LOSO, mean +/- std)\n";
  for (const auto& c : report.cells)
    if (c.table == "video")
      os << "  " << std::left << std::setw(24) << c.model << c.mean << " +/- " << c.stddev
         << "  (n=" << c.n_folds
         << (c.n_excluded ? ", excluded=" + std::to_string(c.n_excluded) : "") << ")\n";
  os << "Frame-level AUC (LOSO, mean +/- std)\n";
  for (const auto& c : report.cells)
    if (c.table == "frame")
      os << "  " << std::left << std::setw(24) << c.model << std::setw(6) << c.method
         << std::setw(14) << c.threshold_mode << c.mean << " +/- " << c.stddev
         << "  (n=" << c.n_folds
         << (c.n_excluded ? ", excluded=" + std::to_string(c.n_excluded) : "") << ")\n";
  if (!report.fold_failures.empty()) {
    os << "Fold failures\n";
    for (const auto& f : report.fold_failures) os << "  " << f << "\n";
  }
  return os.str();
}

inline std::string render_report_csv(const StudyReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "table,model,method,threshold_mode,mean,std,n_folds,n_excluded\n";
  for (const auto& c : report.cells)
    os << c.table << ',' << c.model << ',' << c.method << ',' << c.threshold_mode << ','
       << c.mean << ',' << c.stddev << ',' << c.n_folds << ',' << c.n_excluded << '\n';
  return os.str();
}

}  // namespace wsfl
