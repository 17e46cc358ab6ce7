#pragma once

#include <span>
#include <vector>

#include "evdet/event_model.hpp"
#include "evdet/grid.hpp"
#include "evdet/saliency.hpp"

namespace evdet {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Positive-event count grids of a local window, one per time slice.
struct LocalSlices {
  BBox window;  // sensor coordinates
  std::vector<CountGrid> slices;
};

/// Density, structural-similarity and direction-similarity series of a local window.
struct FeatureSeries {
  std::vector<double> f_d;  // m values
  std::vector<double> f_s;  // m-1 values in [-1, 1]
  std::vector<double> f_p;  // m-1 values in [0, 1]
};

struct RegionScores {
  double s_s = 0.0;
  int s_p = 0;

  friend bool operator==(const RegionScores&, const RegionScores&) = default;
};

struct PrincipalDirection {
  Vec2 direction;  // unit length, first nonzero coordinate positive
  bool isotropic = false;
};

struct PeakValleyFlags {
  bool has_peaks = false;
  bool has_valleys = false;
};

/// Restricts positive events to `bbox` dilated by `margin` (clamped to the
/// sensor) and bins them into `m` equal time slices. Throws DegenerateError
/// when the dilated window is empty.
LocalSlices extract_local_slices(const EventPeriod& period, const BBox& bbox, int m, int margin);
inline LocalSlices extract_local_slices(const EventPeriod& period, const Region& region, int m,
                                        int margin) {
  return extract_local_slices(period, region.bbox, m, margin);
}

std::vector<double> density_series(const LocalSlices& local);

/// Pearson correlation of the row-major flattened grids; 0 when either grid is constant.
double structural_similarity(const CountGrid& a, const CountGrid& b);

/// Unit major-axis eigenvector of the population covariance of `points`.
/// Throws DegenerateError for fewer than two points or when all coincide.
PrincipalDirection principal_direction(std::span<const Vec2> points);

/// |a . b| / (|a| |b|). Throws DegenerateError on a zero vector.
double direction_similarity(const Vec2& a, const Vec2& b);

/// Centered moving mean; near the ends the window is truncated to the samples
/// that exist. Throws ConfigError for even or non-positive windows, or a
/// window longer than the series.
std::vector<double> moving_average(std::span<const double> series, int window);

/// Topographic prominence of the strict local maximum at `i`.
double peak_prominence(std::span<const double> series, std::size_t i);

/// Flags true when at least two interior strict maxima (minima) have a
/// prominence of at least half the series' standard deviation.
PeakValleyFlags peaks_valleys(std::span<const double> series);

FeatureSeries compute_features(const LocalSlices& local);

/// Normalised autocorrelation of the mean-removed series at lags 0..n-1
/// (biased estimator, r[0] = 1). All zeros for a constant series.
std::vector<double> autocorrelation(std::span<const double> series);

/// Tally in 0..6 of peak/valley presence across the smoothed f_d, f_s, f_p,
/// optionally taken on each smoothed series' autocorrelation.
int periodicity_score(const FeatureSeries& features, int smooth_window,
                      bool on_autocorrelation = false);

/// Sum of gray values over the region's pixels.
double saliency_score(const Region& region, const SaliencyMap& map);
double saliency_score(std::span<const Pixel> pixels, const SaliencyMap& map);

}  // namespace evdet
