#include "evdet/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace evdet {
namespace {

void check_slice_count(const EventPeriod& period, int n) {
  if (n < 2) throw ConfigError("saliency slice count must be >= 2, got " + std::to_string(n));
  if (static_cast<std::uint64_t>(n) > period.duration()) {
    throw ConfigError("saliency slice count " + std::to_string(n) + " exceeds period duration of " +
                      std::to_string(period.duration()) + " us");
  }
}

}  // namespace

int slice_of(std::uint64_t t, std::uint64_t t_start, std::uint64_t duration, int n) noexcept {
  const auto offset = static_cast<unsigned __int128>(t - t_start);
  const auto s = static_cast<int>(offset * static_cast<unsigned>(n) / duration);
  return std::min(s, n - 1);
}

std::uint8_t render_gray(int count, int n_slices) noexcept {
  const long v = std::lround(255.0 * count / n_slices);
  return static_cast<std::uint8_t>(std::clamp<long>(v, 0, 255));
}

std::vector<PolaritySlicePair> partition_polarity_slices(const EventPeriod& period, int n) {
  check_slice_count(period, n);
  const auto& sensor = period.sensor();
  std::vector<PolaritySlicePair> slices;
  slices.reserve(n);
  for (int s = 0; s < n; ++s) {
    slices.push_back({BinaryGrid(sensor.width, sensor.height), BinaryGrid(sensor.width, sensor.height),
                      s + 1});
  }
  for (const Event& e : period.events()) {
    auto& pair = slices[slice_of(e.t, period.t_start(), period.duration(), n)];
    (e.p == Polarity::positive ? pair.pos : pair.neg)(e.x, e.y) = 1;
  }
  return slices;
}

BinaryGrid polarity_intersection(const PolaritySlicePair& pair) {
  if (!pair.pos.same_shape(pair.neg)) throw ValidationError("polarity grids differ in shape");
  BinaryGrid out(pair.pos.width(), pair.pos.height());
  const auto& p = pair.pos.values();
  const auto& q = pair.neg.values();
  auto& o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (p[i] && q[i]) ? 1 : 0;
  return out;
}

SaliencyMap accumulate_saliency(std::span<const BinaryGrid> intersections) {
  if (intersections.empty()) throw ConfigError("cannot accumulate zero slices");
  const int w = intersections.front().width();
  const int h = intersections.front().height();
  SaliencyMap map{Grid<std::uint16_t>(w, h), BinaryGrid(w, h), static_cast<int>(intersections.size())};
  auto& counts = map.counts.values();
  for (const BinaryGrid& g : intersections) {
    if (g.width() != w || g.height() != h) throw ValidationError("intersection grids differ in shape");
    const auto& v = g.values();
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += v[i] ? 1 : 0;
  }
  auto& gray = map.gray.values();
  for (std::size_t i = 0; i < counts.size(); ++i) gray[i] = render_gray(counts[i], map.n_slices);
  return map;
}

SaliencyMap build_saliency(const EventPeriod& period, int n) {
  check_slice_count(period, n);
  const auto& sensor = period.sensor();
  const std::size_t cells = static_cast<std::size_t>(sensor.width) * sensor.height;

  // Last slice (1-based, 0 = never) in which each polarity fired, and the last
  // slice already credited to the count.
  struct Stamp {
    std::int32_t pos = 0;
    std::int32_t neg = 0;
    std::int32_t credited = 0;
  };
  std::vector<Stamp> stamps(cells);
  SaliencyMap map{Grid<std::uint16_t>(sensor.width, sensor.height),
                  BinaryGrid(sensor.width, sensor.height), n};
  auto* counts = map.counts.data();

  for (const Event& e : period.events()) {
    const std::int32_t s = slice_of(e.t, period.t_start(), period.duration(), n) + 1;
    const std::size_t i = static_cast<std::size_t>(e.y) * sensor.width + e.x;
    Stamp& st = stamps[i];
    std::int32_t other;
    if (e.p == Polarity::positive) {
      st.pos = s;
      other = st.neg;
    } else {
      st.neg = s;
      other = st.pos;
    }
    if (other == s && st.credited != s) {
      st.credited = s;
      ++counts[i];
    }
  }

  auto& gray = map.gray.values();
  const auto& c = map.counts.values();
  for (std::size_t i = 0; i < cells; ++i) gray[i] = c[i] ? render_gray(c[i], n) : 0;
  return map;
}

BinaryGrid threshold_mask(const SaliencyMap& map, int tau_s) {
  BinaryGrid mask(map.width(), map.height());
  const auto& g = map.gray.values();
  auto& m = mask.values();
  for (std::size_t i = 0; i < g.size(); ++i) m[i] = g[i] > tau_s ? 1 : 0;
  return mask;
}

std::vector<Region> connected_components(const BinaryGrid& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<Region> regions;
  std::vector<Pixel> stack;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!mask.values()[idx] || seen[idx]) continue;

      Region region;
      seen[idx] = 1;
      stack.push_back({x, y});
      int x0 = x, x1 = x, y0 = y, y1 = y;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        region.pixels.push_back(p);
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
        for (int dy = -1; dy <= 1; ++dy) {
          const int ny = p.y + dy;
          if (ny < 0 || ny >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            if ((dx == 0 && dy == 0) || nx < 0 || nx >= w) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (mask.values()[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.push_back({nx, ny});
            }
          }
        }
      }
      std::sort(region.pixels.begin(), region.pixels.end(),
                [](const Pixel& a, const Pixel& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
      region.bbox = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
      regions.push_back(std::move(region));
    }
  }

  std::stable_sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) {
    if (a.bbox.y != b.bbox.y) return a.bbox.y < b.bbox.y;
    return a.bbox.x < b.bbox.x;
  });
  return regions;
}

void write_pgm(const BinaryGrid& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace evdet
