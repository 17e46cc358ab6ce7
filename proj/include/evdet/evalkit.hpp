#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "evdet/annotation.hpp"
#include "evdet/event_model.hpp"

namespace evdet {

inline constexpr double kDefaultIouThreshold = 0.4;

double iou(const BBox& a, const BBox& b) noexcept;

/// A detection's box with its ranking confidence (s_p, then s_s).
struct ScoredBox {
  BBox box;
  int s_p = 0;
  double s_s = 0.0;
};

/// True when `a` ranks strictly ahead of `b`.
bool ranks_before(const ScoredBox& a, const ScoredBox& b) noexcept;

struct MatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  /// Per detection, in input order: index of the claimed ground truth, or -1.
  std::vector<int> matched_gt;
  std::vector<double> matched_iou;
};

/// Greedy matching: detections, taken in the given (ranked) order, each claim
/// the unclaimed ground truth of highest IoU >= iou_thr. Ties on IoU go to the
/// lower ground-truth index.
MatchResult match_detections(std::span<const ScoredBox> ranked, std::span<const BBox> gts,
                             double iou_thr);

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrfScores precision_recall_f1(long long tp, long long fp, long long fn) noexcept;
PrfScores f1_from(double precision, double recall) noexcept;

/// All-points interpolated AP over outcomes in descending confidence order.
double average_precision(std::span<const bool> ranked_is_tp, long long total_gt);

struct PeriodMetrics {
  std::string file;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct MetricsReport {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double map = 0.0;
  double iou_threshold = kDefaultIouThreshold;
  std::vector<PeriodMetrics> per_period;
};

/// A prediction/ground-truth pair for one period.
struct EvalPair {
  Annotation prediction;
  Annotation truth;
};

struct EvalOptions {
  double iou_threshold = kDefaultIouThreshold;
  /// Subset hook: periods whose ground truth fails the predicate are skipped.
  std::function<bool(const Annotation&)> include;
};

MetricsReport evaluate_pairs(const std::vector<EvalPair>& pairs, const EvalOptions& opts = {});

/// Pairs `*.json` files by filename across the two directories. Throws
/// ValidationError listing every orphan on either side.
MetricsReport evaluate_dataset(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir, const EvalOptions& opts = {});

std::string report_to_json(const MetricsReport& report, bool with_periods = false);
std::string report_to_table(const MetricsReport& report);

// Subset buckets for robustness breakdowns, from the ground-truth box.
enum class ScaleBucket { tiny, small, medium, large };
enum class AspectBucket { low, mid, high };

/// Area thresholds 32x32, 64x64, 128x128.
ScaleBucket scale_bucket(const BBox& box) noexcept;
/// min(w,h)/max(w,h) thresholds 0.3 and 0.6.
AspectBucket aspect_bucket(const BBox& box) noexcept;

ScaleBucket parse_scale_bucket(const std::string& name);
AspectBucket parse_aspect_bucket(const std::string& name);

}  // namespace evdet
