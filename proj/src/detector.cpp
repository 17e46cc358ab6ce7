#include "evdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

namespace evdet {

int Cluster::area() const noexcept {
  int total = 0;
  for (const Region& r : members) total += r.area();
  return total;
}

std::vector<Pixel> Cluster::pixels() const {
  std::vector<Pixel> out;
  out.reserve(static_cast<std::size_t>(area()));
  for (const Region& r : members) out.insert(out.end(), r.pixels.begin(), r.pixels.end());
  return out;
}

long long rect_gap_squared(const BBox& a, const BBox& b) noexcept {
  const long long dx = std::max({0, b.x - a.right(), a.x - b.right()});
  const long long dy = std::max({0, b.y - a.bottom(), a.y - b.bottom()});
  return dx * dx + dy * dy;
}

double rect_min_distance(const BBox& a, const BBox& b) noexcept {
  return std::sqrt(static_cast<double>(rect_gap_squared(a, b)));
}

namespace {

struct Node {
  BBox bbox;
  int first_member = 0;
  std::vector<int> members;
  bool active = true;
  int best = -1;
  long long best_d2 = 0;
};

using Key = std::tuple<int, int, int>;

Key key_of(const Node& n) { return {n.bbox.y, n.bbox.x, n.first_member}; }

}  // namespace

std::vector<Cluster> cluster_regions(std::vector<Region> regions, double d_merge) {
  const int n = static_cast<int>(regions.size());
  std::vector<Node> nodes(n);
  for (int i = 0; i < n; ++i) nodes[i] = {regions[i].bbox, i, {i}, true, -1, 0};

  // Row-wise nearest partner under (gap, partner key); O(N) update per merge.
  const auto closer = [&](long long d2, int cand, long long best_d2, int best) {
    if (best < 0) return true;
    if (d2 != best_d2) return d2 < best_d2;
    return key_of(nodes[cand]) < key_of(nodes[best]);
  };
  const auto refresh_row = [&](int i) {
    nodes[i].best = -1;
    for (int k = 0; k < n; ++k) {
      if (k == i || !nodes[k].active) continue;
      const long long d2 = rect_gap_squared(nodes[i].bbox, nodes[k].bbox);
      if (closer(d2, k, nodes[i].best_d2, nodes[i].best)) {
        nodes[i].best = k;
        nodes[i].best_d2 = d2;
      }
    }
  };
  for (int i = 0; i < n; ++i) refresh_row(i);

  const double limit = d_merge * d_merge;
  while (true) {
    int pick = -1;
    std::tuple<long long, Key, Key> pick_rank;
    for (int i = 0; i < n; ++i) {
      if (!nodes[i].active || nodes[i].best < 0) continue;
      const Key ki = key_of(nodes[i]);
      const Key kb = key_of(nodes[nodes[i].best]);
      const auto rank = std::make_tuple(nodes[i].best_d2, std::min(ki, kb), std::max(ki, kb));
      if (pick < 0 || rank < pick_rank) {
        pick = i;
        pick_rank = rank;
      }
    }
    if (pick < 0 || static_cast<double>(std::get<0>(pick_rank)) > limit) break;

    int keep = pick;
    int gone = nodes[pick].best;
    if (key_of(nodes[gone]) < key_of(nodes[keep])) std::swap(keep, gone);

    Node& k = nodes[keep];
    Node& g = nodes[gone];
    k.bbox = bbox_union(k.bbox, g.bbox);
    k.first_member = std::min(k.first_member, g.first_member);
    k.members.insert(k.members.end(), g.members.begin(), g.members.end());
    g.members.clear();
    g.active = false;

    refresh_row(keep);
    for (int r = 0; r < n; ++r) {
      Node& row = nodes[r];
      if (!row.active || r == keep) continue;
      const long long d2 = rect_gap_squared(row.bbox, k.bbox);
      // The merged box is no farther than either part and its key no larger,
      // so rows that pointed at a part now point at the union.
      if (row.best == keep || row.best == gone || closer(d2, keep, row.best_d2, row.best)) {
        row.best = keep;
        row.best_d2 = d2;
      }
    }
  }

  std::vector<int> order;
  for (int i = 0; i < n; ++i) {
    if (nodes[i].active) order.push_back(i);
  }
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return key_of(nodes[a]) < key_of(nodes[b]); });

  std::vector<Cluster> clusters;
  clusters.reserve(order.size());
  for (int i : order) {
    auto members = nodes[i].members;
    std::sort(members.begin(), members.end());
    Cluster c;
    c.bbox = nodes[i].bbox;
    for (int m : members) c.members.push_back(std::move(regions[m]));
    clusters.push_back(std::move(c));
  }
  return clusters;
}

std::vector<Candidate> score_top_k(const std::vector<Cluster>& clusters, const EventPeriod& period,
                                   const SaliencyMap& map, const DetectorConfig& config) {
  if (clusters.empty()) return {};
  const DetectorConfig cfg = config.resolved(period.duration());

  std::vector<double> s_s(clusters.size());
  std::vector<int> area(clusters.size());
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    double sum = 0.0;
    for (const Region& r : clusters[i].members) sum += saliency_score(r, map);
    s_s[i] = sum;
    area[i] = clusters[i].area();
  }

  // Clusters arrive in row-major key order, so a stable sort keeps that as the last tie-break.
  std::vector<std::size_t> order(clusters.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s_s[a] != s_s[b]) return s_s[a] > s_s[b];
    return area[a] > area[b];
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.k_top)));

  std::vector<Candidate> out;
  out.reserve(order.size());
  for (std::size_t i : order) {
    Candidate cand{clusters[i], {}, {}};
    cand.cluster.scores.s_s = s_s[i];
    try {
      const LocalSlices local =
          extract_local_slices(period, clusters[i].bbox, cfg.m(), cfg.region_margin);
      cand.window = local.window;
      cand.features = compute_features(local);
      cand.cluster.scores.s_p =
          periodicity_score(cand.features, cfg.smooth_window, cfg.autocorrelation_extrema);
    } catch (const DegenerateError&) {
      cand.cluster.scores.s_p = 0;
    }
    out.push_back(std::move(cand));
  }
  return out;
}

std::vector<Candidate> accept_candidates(std::vector<Candidate> scored, int tau_p) {
  std::erase_if(scored, [&](const Candidate& c) { return c.cluster.scores.s_p < tau_p; });
  std::stable_sort(scored.begin(), scored.end(), [](const Candidate& a, const Candidate& b) {
    if (a.cluster.scores.s_p != b.cluster.scores.s_p) return a.cluster.scores.s_p > b.cluster.scores.s_p;
    return a.cluster.scores.s_s > b.cluster.scores.s_s;
  });
  return scored;
}

std::vector<Candidate> coarse_select(const std::vector<Cluster>& clusters, const EventPeriod& period,
                                     const SaliencyMap& map, const DetectorConfig& config) {
  return accept_candidates(score_top_k(clusters, period, map, config), config.tau_p);
}

ComponentShape component_shape(const Region& component, const SaliencyMap& map) {
  ComponentShape shape;
  // Moments are taken relative to the component's box so that translating the
  // input reproduces them bit for bit.
  const int ox = component.bbox.x;
  const int oy = component.bbox.y;
  double wsum = 0.0, mx = 0.0, my = 0.0;
  for (const Pixel& p : component.pixels) {
    const double w = map.gray(p.x, p.y);
    wsum += w;
    mx += w * (p.x - ox);
    my += w * (p.y - oy);
  }
  if (wsum <= 0.0) return shape;
  mx /= wsum;
  my /= wsum;
  for (const Pixel& p : component.pixels) {
    const double w = map.gray(p.x, p.y);
    const double dx = (p.x - ox) - mx;
    const double dy = (p.y - oy) - my;
    shape.cxx += w * dx * dx;
    shape.cxy += w * dx * dy;
    shape.cyy += w * dy * dy;
  }
  shape.cxx /= wsum;
  shape.cxy /= wsum;
  shape.cyy /= wsum;
  shape.centroid = {ox + mx, oy + my};
  const double det = std::max(0.0, shape.cxx * shape.cyy - shape.cxy * shape.cxy);
  // Semi-axes 2*sqrt(lambda_1), 2*sqrt(lambda_2).
  shape.ellipse_area = 4.0 * std::numbers::pi * std::sqrt(det);
  shape.area_ratio = shape.ellipse_area / static_cast<double>(component.area());
  return shape;
}

Detection gaussian_fine_refine(const Cluster& candidate, const SaliencyMap& map) {
  Detection det;
  det.s_p = candidate.scores.s_p;
  det.s_s = candidate.scores.s_s;

  bool any = false;
  for (const Region& component : candidate.members) {
    const ComponentShape shape = component_shape(component, map);
    const bool consistent = shape.area_ratio >= kMinEllipseRatio &&
                            shape.area_ratio <= kMaxEllipseRatio &&
                            candidate.bbox.contains(shape.centroid.x, shape.centroid.y);
    if (!consistent) continue;
    det.bbox = any ? bbox_union(det.bbox, component.bbox) : component.bbox;
    det.pixels.insert(det.pixels.end(), component.pixels.begin(), component.pixels.end());
    any = true;
  }
  if (!any) {
    det.bbox = candidate.bbox;
    det.pixels = candidate.pixels();
  }
  return det;
}

DetectionTrace detect_period_traced(const EventPeriod& period, const DetectorConfig& config) {
  DetectionTrace trace;
  trace.config = config.resolved(period.duration());
  const DetectorConfig& cfg = trace.config;
  const bool n_fits = static_cast<std::uint64_t>(cfg.n()) <= period.duration();
  const bool m_fits = static_cast<std::uint64_t>(cfg.m()) <= period.duration();
  if ((!n_fits && config.n_slices) || (!m_fits && config.m_slices)) {
    throw ConfigError("slice counts exceed the period duration of " +
                      std::to_string(period.duration()) + " us");
  }
  // Defaulted slice counts that do not fit: too short a period to say anything.
  if (!n_fits || !m_fits) return trace;

  trace.saliency = build_saliency(period, cfg.n());
  trace.regions = connected_components(threshold_mask(trace.saliency, cfg.tau_s));
  trace.clusters = cluster_regions(trace.regions, cfg.d_merge);
  trace.scored = score_top_k(trace.clusters, period, trace.saliency, cfg);
  trace.candidates = accept_candidates(trace.scored, cfg.tau_p);
  for (const Candidate& c : trace.candidates) {
    trace.detections.push_back(gaussian_fine_refine(c.cluster, trace.saliency));
  }
  return trace;
}

std::vector<Detection> detect_period(const EventPeriod& period, const DetectorConfig& config) {
  return detect_period_traced(period, config).detections;
}

}  // namespace evdet
