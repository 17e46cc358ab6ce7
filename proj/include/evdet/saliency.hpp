#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "evdet/event_model.hpp"
#include "evdet/grid.hpp"

namespace evdet {

/// Binary occupancy of each polarity within one time slice.
struct PolaritySlicePair {
  BinaryGrid pos;
  BinaryGrid neg;
  int slice_index = 0;  // 1-based
};

/// Per-pixel number of slices in which both polarities fired, plus its 8-bit rendering.
struct SaliencyMap {
  Grid<std::uint16_t> counts;
  BinaryGrid gray;
  int n_slices = 0;

  int width() const noexcept { return counts.width(); }
  int height() const noexcept { return counts.height(); }
};

/// 8-connected set of mask cells.
struct Region {
  BBox bbox;
  std::vector<Pixel> pixels;  // row-major order

  int area() const noexcept { return static_cast<int>(pixels.size()); }
};

/// Slice index (0-based) of a timestamp: floor((t - t_start) * n / duration),
/// with the final boundary folded into the last slice.
int slice_of(std::uint64_t t, std::uint64_t t_start, std::uint64_t duration, int n) noexcept;

std::vector<PolaritySlicePair> partition_polarity_slices(const EventPeriod& period, int n);

BinaryGrid polarity_intersection(const PolaritySlicePair& pair);

/// Sums intersection grids and renders gray = min(255, round(255 * count / n)).
SaliencyMap accumulate_saliency(std::span<const BinaryGrid> intersections);

/// Single-pass equivalent of partition -> intersect -> accumulate. Memory is
/// O(pixels) regardless of n.
SaliencyMap build_saliency(const EventPeriod& period, int n);

std::uint8_t render_gray(int count, int n_slices) noexcept;

/// mask = gray > tau_s.
BinaryGrid threshold_mask(const SaliencyMap& map, int tau_s);

/// Maximal 8-connected components of the nonzero cells, sorted by bbox
/// top-left (row, then column), then by first pixel.
std::vector<Region> connected_components(const BinaryGrid& mask);

/// Binary PGM (P5), 8-bit.
void write_pgm(const BinaryGrid& image, const std::filesystem::path& path);

}  // namespace evdet
