#include "evdet/event_model.hpp"

#include <algorithm>
#include <sstream>

namespace evdet {

void SensorGeometry::validate() const {
  if (width <= 0 || height <= 0) {
    throw ValidationError("sensor geometry must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (width > 65535 || height > 65535) {
    throw ValidationError("sensor geometry exceeds 16-bit coordinates");
  }
}

EventPeriod::EventPeriod(std::vector<Event> events, std::uint64_t t_start, std::uint64_t duration,
                         SensorGeometry sensor)
    : events_(std::move(events)), t_start_(t_start), duration_(duration), sensor_(sensor) {
  sensor_.validate();
  if (duration_ == 0) throw ValidationError("event period duration must be > 0");

  const auto by_time = [](const Event& a, const Event& b) { return a.t < b.t; };
  if (!std::is_sorted(events_.begin(), events_.end(), by_time)) {
    std::stable_sort(events_.begin(), events_.end(), by_time);
    reordered_ = true;
  }

  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    if (!sensor_.contains(e.x, e.y)) {
      std::ostringstream msg;
      msg << "event " << i << " at (" << e.x << "," << e.y << ") outside " << sensor_.width << "x"
          << sensor_.height << " sensor";
      throw ValidationError(msg.str());
    }
    if (e.t < t_start_ || e.t >= t_start_ + duration_) {
      std::ostringstream msg;
      msg << "event " << i << " at t=" << e.t << " outside period [" << t_start_ << ", "
          << t_start_ + duration_ << ")";
      throw ValidationError(msg.str());
    }
  }
}

BBox BBox::clamped(const SensorGeometry& sensor) const {
  const int x0 = std::clamp(x, 0, sensor.width);
  const int y0 = std::clamp(y, 0, sensor.height);
  const int x1 = std::clamp(right(), 0, sensor.width);
  const int y1 = std::clamp(bottom(), 0, sensor.height);
  return {x0, y0, x1 - x0, y1 - y0};
}

BBox BBox::dilated(int margin, const SensorGeometry& sensor) const {
  return BBox{x - margin, y - margin, w + 2 * margin, h + 2 * margin}.clamped(sensor);
}

BBox bbox_union(const BBox& a, const BBox& b) {
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.right(), b.right());
  const int y1 = std::max(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

std::string to_string(const BBox& b) {
  std::ostringstream s;
  s << "(" << b.x << "," << b.y << "," << b.w << "," << b.h << ")";
  return s.str();
}

int default_n_slices(std::uint64_t duration_us) {
  return static_cast<int>(std::max<std::uint64_t>(2, duration_us / 1000));
}

int default_m_slices(std::uint64_t duration_us) {
  return static_cast<int>(std::max<std::uint64_t>(4, 2 * (duration_us / 1000)));
}

void DetectorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (n_slices && *n_slices < 2) fail("n_slices must be >= 2, got " + std::to_string(*n_slices));
  if (m_slices && *m_slices < 4) fail("m_slices must be >= 4, got " + std::to_string(*m_slices));
  if (tau_s < 0 || tau_s > 255) fail("tau_s must be in range 0-255, got " + std::to_string(tau_s));
  if (tau_p < 0 || tau_p > 6) fail("tau_p must be in range 0-6, got " + std::to_string(tau_p));
  if (k_top < 1) fail("k_top must be >= 1, got " + std::to_string(k_top));
  if (!(d_merge >= 0.0)) fail("d_merge must be >= 0");
  if (smooth_window < 1 || smooth_window % 2 == 0) {
    fail("smooth_window must be odd and >= 1, got " + std::to_string(smooth_window));
  }
  if (region_margin < 0) fail("region_margin must be >= 0, got " + std::to_string(region_margin));
}

DetectorConfig DetectorConfig::resolved(std::uint64_t duration_us) const {
  DetectorConfig out = *this;
  if (!out.n_slices) out.n_slices = default_n_slices(duration_us);
  if (!out.m_slices) out.m_slices = default_m_slices(duration_us);
  out.validate();
  return out;
}

}  // namespace evdet
