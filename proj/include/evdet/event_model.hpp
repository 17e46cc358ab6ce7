#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evdet {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text or bytes. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& detail, std::size_t line = 0)
      : Error(line ? detail + " (line " + std::to_string(line) + ")" : detail),
        detail_(detail),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
};

/// Well-formed data that breaks a domain invariant (bounds, ordering, ranges).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid detector or generator parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures; the message always carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input too degenerate for a geometric computation (e.g. all points identical).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

enum class Polarity : std::uint8_t { negative = 0, positive = 1 };

constexpr Polarity flipped(Polarity p) noexcept {
  return p == Polarity::positive ? Polarity::negative : Polarity::positive;
}

struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  Polarity p = Polarity::negative;

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  int width = 640;
  int height = 480;

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width && y < height; }
  void validate() const;

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

/// A bounded time window [t_start, t_start + duration) of events from one sensor.
///
/// Construction validates every event against the sensor bounds and the time
/// window. Out-of-order input is repaired with a stable sort and reported via
/// `was_reordered()`. Instances are immutable afterwards.
class EventPeriod {
 public:
  EventPeriod(std::vector<Event> events, std::uint64_t t_start, std::uint64_t duration,
              SensorGeometry sensor);

  const std::vector<Event>& events() const noexcept { return events_; }
  std::uint64_t t_start() const noexcept { return t_start_; }
  std::uint64_t duration() const noexcept { return duration_; }
  std::uint64_t t_end() const noexcept { return t_start_ + duration_; }
  const SensorGeometry& sensor() const noexcept { return sensor_; }
  bool was_reordered() const noexcept { return reordered_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  friend bool operator==(const EventPeriod& a, const EventPeriod& b) {
    return a.t_start_ == b.t_start_ && a.duration_ == b.duration_ && a.sensor_ == b.sensor_ &&
           a.events_ == b.events_;
  }

 private:
  std::vector<Event> events_;
  std::uint64_t t_start_;
  std::uint64_t duration_;
  SensorGeometry sensor_;
  bool reordered_ = false;
};

// ---------------------------------------------------------------------------
// Boxes
// ---------------------------------------------------------------------------

/// Axis-aligned pixel box covering columns [x, x+w) and rows [y, y+h).
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const noexcept { return x + w; }
  int bottom() const noexcept { return y + h; }
  long long area() const noexcept { return static_cast<long long>(w) * h; }
  bool valid() const noexcept { return w > 0 && h > 0; }
  bool contains(int px, int py) const noexcept {
    return px >= x && py >= y && px < right() && py < bottom();
  }
  bool contains(double px, double py) const noexcept {
    return px >= x && py >= y && px <= right() - 1 && py <= bottom() - 1;
  }

  /// Grows by `margin` on every side, then clamps to the sensor.
  BBox dilated(int margin, const SensorGeometry& sensor) const;
  BBox clamped(const SensorGeometry& sensor) const;
  BBox translated(int dx, int dy) const noexcept { return {x + dx, y + dy, w, h}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

BBox bbox_union(const BBox& a, const BBox& b);
std::string to_string(const BBox& b);

// ---------------------------------------------------------------------------
// Detector configuration
// ---------------------------------------------------------------------------

struct DetectorConfig {
  /// Saliency slices. Unset: one per millisecond of the period.
  std::optional<int> n_slices;
  /// Feature slices. Unset: two per millisecond of the period.
  std::optional<int> m_slices;
  int tau_s = 50;
  int tau_p = 3;
  int k_top = 4;
  double d_merge = 50.0;
  int smooth_window = 3;
  int region_margin = 2;
  /// Look for peaks and valleys in the autocorrelation of each smoothed
  /// series rather than in the series itself. Off by default.
  bool autocorrelation_extrema = false;

  /// Throws ConfigError naming the first offending field and its valid range.
  void validate() const;

  /// Fills unset slice counts for a period of `duration_us` and validates the result.
  DetectorConfig resolved(std::uint64_t duration_us) const;

  int n() const { return n_slices.value_or(0); }
  int m() const { return m_slices.value_or(0); }
};

int default_n_slices(std::uint64_t duration_us);
int default_m_slices(std::uint64_t duration_us);

}  // namespace evdet
