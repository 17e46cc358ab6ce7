#include "evdet/spatiotemporal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace evdet {
namespace {

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

std::vector<Vec2> occupied_cells(const CountGrid& g) {
  std::vector<Vec2> points;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (g(x, y)) points.push_back({static_cast<double>(x), static_cast<double>(y)});
    }
  }
  return points;
}

// Direction of a slice's occupied cells, or nullopt when it has none to give.
std::optional<Vec2> slice_direction(const CountGrid& g) {
  const auto points = occupied_cells(g);
  if (points.size() < 2) return std::nullopt;
  try {
    const PrincipalDirection pd = principal_direction(points);
    if (pd.isotropic) return std::nullopt;
    return pd.direction;
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

}  // namespace

LocalSlices extract_local_slices(const EventPeriod& period, const BBox& bbox, int m, int margin) {
  if (m < 4) throw ConfigError("feature slice count must be >= 4, got " + std::to_string(m));
  if (static_cast<std::uint64_t>(m) > period.duration()) {
    throw ConfigError("feature slice count " + std::to_string(m) + " exceeds period duration");
  }
  const BBox window = bbox.dilated(margin, period.sensor());
  if (!window.valid()) throw DegenerateError("local window " + to_string(bbox) + " is empty");

  LocalSlices local{window, std::vector<CountGrid>(m, CountGrid(window.w, window.h))};
  for (const Event& e : period.events()) {
    if (e.p != Polarity::positive || !window.contains(static_cast<int>(e.x), static_cast<int>(e.y))) {
      continue;
    }
    auto& cell = local.slices[slice_of(e.t, period.t_start(), period.duration(), m)](
        e.x - window.x, e.y - window.y);
    if (cell < std::numeric_limits<std::uint16_t>::max()) ++cell;
  }
  return local;
}

std::vector<double> density_series(const LocalSlices& local) {
  std::vector<double> f_d;
  f_d.reserve(local.slices.size());
  for (const CountGrid& g : local.slices) {
    const auto& v = g.values();
    f_d.push_back(static_cast<double>(std::accumulate(v.begin(), v.end(), std::uint64_t{0})));
  }
  return f_d;
}

double structural_similarity(const CountGrid& a, const CountGrid& b) {
  if (!a.same_shape(b)) throw ValidationError("structural_similarity: grids differ in shape");
  const auto& u = a.values();
  const auto& v = b.values();
  const std::size_t n = u.size();
  if (n == 0) return 0.0;

  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= static_cast<double>(n);
  mv /= static_cast<double>(n);

  double suu = 0.0, svv = 0.0, suv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = u[i] - mu;
    const double dv = v[i] - mv;
    suu += du * du;
    svv += dv * dv;
    suv += du * dv;
  }
  if (suu <= 0.0 || svv <= 0.0) return 0.0;
  return std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
}

PrincipalDirection principal_direction(std::span<const Vec2> points) {
  if (points.size() < 2) throw DegenerateError("principal direction needs at least two points");
  const double w = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const Vec2& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= w;
  my /= w;

  // C = (P - p_c)^T (P - p_c) / w
  double cxx = 0.0, cxy = 0.0, cyy = 0.0;
  for (const Vec2& p : points) {
    const double dx = p.x - mx;
    const double dy = p.y - my;
    cxx += dx * dx;
    cxy += dx * dy;
    cyy += dy * dy;
  }
  cxx /= w;
  cxy /= w;
  cyy /= w;
  if (cxx == 0.0 && cyy == 0.0) throw DegenerateError("all points coincide");

  const double half_diff = 0.5 * (cxx - cyy);
  const double disc = std::hypot(half_diff, cxy);
  if (disc <= 1e-12 * (cxx + cyy)) return {{1.0, 0.0}, true};

  // C xi = lambda_max xi; take the better-conditioned of the two null-space rows.
  const double lambda = 0.5 * (cxx + cyy) + disc;
  Vec2 v1{cxy, lambda - cxx};
  Vec2 v2{lambda - cyy, cxy};
  const double n1 = std::hypot(v1.x, v1.y);
  const double n2 = std::hypot(v2.x, v2.y);
  Vec2 v = n1 >= n2 ? Vec2{v1.x / n1, v1.y / n1} : Vec2{v2.x / n2, v2.y / n2};
  if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) v = {-v.x, -v.y};
  return {v, false};
}

double direction_similarity(const Vec2& a, const Vec2& b) {
  const double na = std::hypot(a.x, a.y);
  const double nb = std::hypot(b.x, b.y);
  if (na == 0.0 || nb == 0.0) throw DegenerateError("direction_similarity: zero vector");
  return std::min(1.0, std::abs(a.x * b.x + a.y * b.y) / (na * nb));
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1 || window % 2 == 0) {
    throw ConfigError("moving average window must be odd and >= 1, got " + std::to_string(window));
  }
  if (static_cast<std::size_t>(window) > series.size()) {
    throw ConfigError("moving average window " + std::to_string(window) + " exceeds series length " +
                      std::to_string(series.size()));
  }
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> out(series.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + half);
    double sum = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double peak_prominence(std::span<const double> series, std::size_t i) {
  const double top = series[i];
  double left_min = top;
  for (std::size_t j = i; j-- > 0;) {
    if (series[j] > top) break;
    left_min = std::min(left_min, series[j]);
  }
  double right_min = top;
  for (std::size_t j = i + 1; j < series.size(); ++j) {
    if (series[j] > top) break;
    right_min = std::min(right_min, series[j]);
  }
  return top - std::max(left_min, right_min);
}

PeakValleyFlags peaks_valleys(std::span<const double> series) {
  if (series.size() < 5) return {};
  double max_abs = 0.0;
  for (double x : series) max_abs = std::max(max_abs, std::abs(x));
  const double sd = population_std(series);
  // Rounding residue of a constant series is not an extremum.
  if (sd <= 1e-12 * max_abs || sd == 0.0) return {};

  const double floor = 0.5 * sd;
  std::vector<double> negated(series.size());
  std::transform(series.begin(), series.end(), negated.begin(), [](double x) { return -x; });

  int peaks = 0, valleys = 0;
  for (std::size_t i = 1; i + 1 < series.size(); ++i) {
    if (series[i] > series[i - 1] && series[i] > series[i + 1] &&
        peak_prominence(series, i) >= floor) {
      ++peaks;
    }
    if (series[i] < series[i - 1] && series[i] < series[i + 1] &&
        peak_prominence(negated, i) >= floor) {
      ++valleys;
    }
  }
  return {peaks >= 2, valleys >= 2};
}

FeatureSeries compute_features(const LocalSlices& local) {
  FeatureSeries f;
  f.f_d = density_series(local);
  const std::size_t m = local.slices.size();
  if (m < 2) return f;

  std::vector<std::optional<Vec2>> directions;
  directions.reserve(m);
  for (const CountGrid& g : local.slices) directions.push_back(slice_direction(g));

  f.f_s.reserve(m - 1);
  f.f_p.reserve(m - 1);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    f.f_s.push_back(structural_similarity(local.slices[j], local.slices[j + 1]));
    const auto& a = directions[j];
    const auto& b = directions[j + 1];
    f.f_p.push_back(a && b ? direction_similarity(*a, *b) : 0.0);
  }
  return f;
}

std::vector<double> autocorrelation(std::span<const double> series) {
  const std::size_t n = series.size();
  std::vector<double> r(n, 0.0);
  if (n == 0) return r;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double energy = 0.0;
  for (double v : series) energy += (v - mean) * (v - mean);
  if (energy <= 0.0) return r;
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) acc += (series[i] - mean) * (series[i + k] - mean);
    r[k] = acc / energy;
  }
  return r;
}

int periodicity_score(const FeatureSeries& features, int smooth_window, bool on_autocorrelation) {
  if (smooth_window < 1 || smooth_window % 2 == 0) {
    throw ConfigError("smooth_window must be odd and >= 1, got " + std::to_string(smooth_window));
  }
  int score = 0;
  for (const auto* series : {&features.f_d, &features.f_s, &features.f_p}) {
    if (series->size() < 5 || series->size() < static_cast<std::size_t>(smooth_window)) continue;
    auto smoothed = moving_average(*series, smooth_window);
    if (on_autocorrelation) smoothed = autocorrelation(smoothed);
    const PeakValleyFlags flags = peaks_valleys(smoothed);
    score += (flags.has_peaks ? 1 : 0) + (flags.has_valleys ? 1 : 0);
  }
  return score;
}

double saliency_score(std::span<const Pixel> pixels, const SaliencyMap& map) {
  double sum = 0.0;
  for (const Pixel& p : pixels) sum += map.gray(p.x, p.y);
  return sum;
}

double saliency_score(const Region& region, const SaliencyMap& map) {
  return saliency_score(region.pixels, map);
}

}  // namespace evdet
