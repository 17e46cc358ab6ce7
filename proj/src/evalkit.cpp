#include "evdet/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace evdet {

double iou(const BBox& a, const BBox& b) noexcept {
  const long long ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const long long iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const long long inter = ix * iy;
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

bool ranks_before(const ScoredBox& a, const ScoredBox& b) noexcept {
  if (a.s_p != b.s_p) return a.s_p > b.s_p;
  return a.s_s > b.s_s;
}

MatchResult match_detections(std::span<const ScoredBox> ranked, std::span<const BBox> gts,
                             double iou_thr) {
  MatchResult r;
  r.matched_gt.assign(ranked.size(), -1);
  r.matched_iou.assign(ranked.size(), 0.0);
  std::vector<bool> claimed(gts.size(), false);
  for (std::size_t d = 0; d < ranked.size(); ++d) {
    int best = -1;
    double best_iou = iou_thr;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g]) continue;
      const double v = iou(ranked[d].box, gts[g]);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      claimed[best] = true;
      r.matched_gt[d] = best;
      r.matched_iou[d] = best_iou;
      ++r.tp;
    } else {
      ++r.fp;
    }
  }
  r.fn = static_cast<int>(gts.size()) - r.tp;
  return r;
}

PrfScores f1_from(double precision, double recall) noexcept {
  const double sum = precision + recall;
  return {precision, recall, sum > 0.0 ? 2.0 * precision * recall / sum : 0.0};
}

PrfScores precision_recall_f1(long long tp, long long fp, long long fn) noexcept {
  const double p = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return f1_from(p, r);
}

double average_precision(std::span<const bool> ranked_is_tp, long long total_gt) {
  if (total_gt <= 0 || ranked_is_tp.empty()) return 0.0;
  const std::size_t n = ranked_is_tp.size();
  std::vector<double> precision(n);
  long long tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_is_tp[k]) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  // Precision envelope: best precision at this recall or beyond.
  for (std::size_t k = n - 1; k-- > 0;) precision[k] = std::max(precision[k], precision[k + 1]);

  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_is_tp[k]) sum += precision[k];
  }
  return sum / static_cast<double>(total_gt);
}

MetricsReport evaluate_pairs(const std::vector<EvalPair>& pairs, const EvalOptions& opts) {
  MetricsReport report;
  report.iou_threshold = opts.iou_threshold;

  struct Outcome {
    ScoredBox box;
    bool tp;
  };
  std::vector<Outcome> outcomes;

  for (const EvalPair& pair : pairs) {
    if (opts.include && !opts.include(pair.truth)) continue;
    std::vector<ScoredBox> dets;
    for (const AnnotatedBox& b : pair.prediction.boxes) {
      dets.push_back({b.box, b.s_p.value_or(0), b.s_s.value_or(0.0)});
    }
    std::stable_sort(dets.begin(), dets.end(), ranks_before);
    std::vector<BBox> gts;
    for (const AnnotatedBox& b : pair.truth.boxes) gts.push_back(b.box);

    const MatchResult m = match_detections(dets, gts, opts.iou_threshold);
    report.tp += m.tp;
    report.fp += m.fp;
    report.fn += m.fn;
    report.per_period.push_back({pair.truth.file, m.tp, m.fp, m.fn});
    for (std::size_t d = 0; d < dets.size(); ++d) outcomes.push_back({dets[d], m.matched_gt[d] >= 0});
  }

  const PrfScores prf = precision_recall_f1(report.tp, report.fp, report.fn);
  report.precision = prf.precision;
  report.recall = prf.recall;
  report.f1 = prf.f1;

  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const Outcome& a, const Outcome& b) { return ranks_before(a.box, b.box); });
  const auto flags = std::make_unique<bool[]>(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) flags[i] = outcomes[i].tp;
  report.map = average_precision(std::span<const bool>(flags.get(), outcomes.size()),
                                 report.tp + report.fn);
  return report;
}

MetricsReport evaluate_dataset(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir, const EvalOptions& opts) {
  namespace fs = std::filesystem;
  const auto list = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::map<std::string, fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.emplace(entry.path().filename().string(), entry.path());
      }
    }
    return files;
  };
  const auto preds = list(pred_dir);
  const auto gts = list(gt_dir);

  std::vector<std::string> orphans;
  for (const auto& [name, path] : preds) {
    if (!gts.count(name)) orphans.push_back("prediction without ground truth: " + name);
  }
  for (const auto& [name, path] : gts) {
    if (!preds.count(name)) orphans.push_back("ground truth without prediction: " + name);
  }
  if (!orphans.empty()) {
    std::string msg = "unmatched files:";
    for (const auto& o : orphans) msg += "\n  " + o;
    throw ValidationError(msg);
  }

  std::vector<EvalPair> pairs;
  for (const auto& [name, path] : gts) {
    pairs.push_back({load_annotations(preds.at(name)), load_annotations(path)});
    pairs.back().truth.file = name;
  }
  return evaluate_pairs(pairs, opts);
}

std::string report_to_json(const MetricsReport& report, bool with_periods) {
  nlohmann::json j = {{"tp", report.tp},
                      {"fp", report.fp},
                      {"fn", report.fn},
                      {"precision", report.precision},
                      {"recall", report.recall},
                      {"f1", report.f1},
                      {"map", report.map},
                      {"iou_threshold", report.iou_threshold},
                      {"periods", report.per_period.size()}};
  if (with_periods) {
    nlohmann::json rows = nlohmann::json::array();
    for (const PeriodMetrics& p : report.per_period) {
      rows.push_back({{"file", p.file}, {"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}});
    }
    j["per_period"] = std::move(rows);
  }
  return j.dump(2);
}

std::string report_to_table(const MetricsReport& report) {
  char line[160];
  std::ostringstream out;
  std::snprintf(line, sizeof line, "periods %zu  IoU>=%.2f\n", report.per_period.size(),
                report.iou_threshold);
  out << line;
  std::snprintf(line, sizeof line, "TP=%lld FP=%lld FN=%lld\n", report.tp, report.fp, report.fn);
  out << line;
  std::snprintf(line, sizeof line, "P=%.3f R=%.3f F1=%.3f mAP=%.3f\n", report.precision,
                report.recall, report.f1, report.map);
  out << line;
  return out.str();
}

ScaleBucket scale_bucket(const BBox& box) noexcept {
  const long long a = box.area();
  if (a < 32 * 32) return ScaleBucket::tiny;
  if (a < 64 * 64) return ScaleBucket::small;
  if (a < 128 * 128) return ScaleBucket::medium;
  return ScaleBucket::large;
}

AspectBucket aspect_bucket(const BBox& box) noexcept {
  const double lo = std::min(box.w, box.h);
  const double hi = std::max(box.w, box.h);
  const double ratio = hi > 0 ? lo / hi : 0.0;
  if (ratio <= 0.3) return AspectBucket::low;
  if (ratio <= 0.6) return AspectBucket::mid;
  return AspectBucket::high;
}

ScaleBucket parse_scale_bucket(const std::string& name) {
  if (name == "tiny") return ScaleBucket::tiny;
  if (name == "small") return ScaleBucket::small;
  if (name == "medium") return ScaleBucket::medium;
  if (name == "large") return ScaleBucket::large;
  throw ConfigError("unknown scale bucket '" + name + "' (tiny|small|medium|large)");
}

AspectBucket parse_aspect_bucket(const std::string& name) {
  if (name == "low") return AspectBucket::low;
  if (name == "mid") return AspectBucket::mid;
  if (name == "high") return AspectBucket::high;
  throw ConfigError("unknown aspect bucket '" + name + "' (low|mid|high)");
}

}  // namespace evdet
