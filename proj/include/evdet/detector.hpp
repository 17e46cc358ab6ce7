#pragma once

#include <vector>

#include "evdet/detection.hpp"
#include "evdet/event_model.hpp"
#include "evdet/saliency.hpp"
#include "evdet/spatiotemporal.hpp"

namespace evdet {

struct Cluster {
  std::vector<Region> members;
  BBox bbox;  // union of member bboxes
  RegionScores scores;

  int area() const noexcept;
  std::vector<Pixel> pixels() const;
};

/// A cluster that survived the coarse stage together with the evidence behind it.
struct Candidate {
  Cluster cluster;
  FeatureSeries features;
  BBox window;
};

/// Squared gap between two boxes treated as continuous rectangles [x, x+w).
long long rect_gap_squared(const BBox& a, const BBox& b) noexcept;
double rect_min_distance(const BBox& a, const BBox& b) noexcept;

/// Agglomerates regions by repeatedly merging the two clusters whose union
/// boxes are closest, while that distance is <= d_merge. Ties go to the pair
/// whose smaller key is smallest, then whose larger key is; a cluster's key is
/// (top, left, lowest member index). Output is sorted by key.
std::vector<Cluster> cluster_regions(std::vector<Region> regions, double d_merge);

/// Top-K clusters by saliency score (ties: larger area, then row-major), each
/// with its periodicity score and feature series.
std::vector<Candidate> score_top_k(const std::vector<Cluster>& clusters, const EventPeriod& period,
                                   const SaliencyMap& map, const DetectorConfig& config);

/// Keeps s_p >= tau_p, ranked by (s_p desc, s_s desc).
std::vector<Candidate> accept_candidates(std::vector<Candidate> scored, int tau_p);

/// score_top_k followed by accept_candidates.
std::vector<Candidate> coarse_select(const std::vector<Cluster>& clusters, const EventPeriod& period,
                                     const SaliencyMap& map, const DetectorConfig& config);

/// Shape statistics of one component used by the fine stage.
struct ComponentShape {
  Vec2 centroid;      // gray-weighted, sensor coordinates
  double cxx = 0.0;   // gray-weighted covariance
  double cxy = 0.0;
  double cyy = 0.0;
  double ellipse_area = 0.0;  // area of the 2-sigma ellipse
  double area_ratio = 0.0;    // ellipse_area / pixel count
};

ComponentShape component_shape(const Region& component, const SaliencyMap& map);

inline constexpr double kMinEllipseRatio = 0.5;
inline constexpr double kMaxEllipseRatio = 2.0;

/// Drops components whose 2-sigma ellipse disagrees with their pixel area and
/// tightens the box around the rest. Falls back to the candidate box when
/// nothing qualifies. Scores are carried over from the cluster.
Detection gaussian_fine_refine(const Cluster& candidate, const SaliencyMap& map);

/// Intermediate products of one detector run, for dumps and diagnostics.
struct DetectionTrace {
  DetectorConfig config;  // resolved
  SaliencyMap saliency;
  std::vector<Region> regions;
  std::vector<Cluster> clusters;
  std::vector<Candidate> scored;      // top-K, all scores
  std::vector<Candidate> candidates;  // passed tau_p, ranked
  std::vector<Detection> detections;
};

/// saliency -> threshold -> components -> clusters -> coarse -> fine.
std::vector<Detection> detect_period(const EventPeriod& period, const DetectorConfig& config);
DetectionTrace detect_period_traced(const EventPeriod& period, const DetectorConfig& config);

}  // namespace evdet
