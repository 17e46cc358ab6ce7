#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evdet/annotation.hpp"
#include "evdet/event_model.hpp"
#include "evdet/spatiotemporal.hpp"

namespace evdet {

/// A rotating propeller seen head-on: `blades` thin blades of angular width
/// `blade_width` sweep the disc of `radius` around `center`. Each blade's
/// leading edge fires positive events on the pixels it crosses and its
/// trailing edge fires negative ones (reversed when `leading_positive` is
/// false). Per crossing the pixel emits Poisson(`events_per_edge` * c(phi))
/// events, where c(phi) = 1 + contrast_modulation * cos(blades * phi) models
/// angle-dependent contrast against the background.
struct PropellerSpec {
  Vec2 center{320.0, 240.0};
  double radius = 50.0;
  int blades = 2;
  double rpm = 10000.0;
  double phase = 0.0;  // radians
  double events_per_edge = 2.0;
  double blade_width = 0.15;  // radians
  double contrast_modulation = 0.5;
  double hub_radius = 2.0;
  double jitter_us = 40.0;
  bool leading_positive = true;

  static constexpr double kMinRpm = 5000.0;
  static constexpr double kMaxRpm = 15000.0;

  void validate(const SensorGeometry& sensor) const;
  /// Blade passes per second at any swept pixel.
  double blade_pass_hz() const noexcept { return rpm / 60.0 * blades; }
  /// Square of side 2*radius centred on the hub, clamped to the sensor.
  BBox truth_box(const SensorGeometry& sensor) const;
};

/// Ego-motion clutter: straight bars of `edge_length` x `bar_width` pixels
/// translating at `speed` across the frame, plus uniform random events.
struct BackgroundSpec {
  int edge_count = 0;
  double speed = 2.0;       // pixels per ms
  double noise_rate = 0.0;  // events per ms over the whole frame
  double edge_length = 120.0;
  double bar_width = 6.0;

  void validate() const;
};

struct SynthScene {
  SensorGeometry sensor;
  std::uint64_t duration_us = 20000;
  std::vector<PropellerSpec> propellers;
  BackgroundSpec background;
  std::uint64_t seed = 0;
  std::string name = "synth";
};

struct PropellerEvents {
  std::vector<Event> events;
  BBox truth;
};

struct GeneratedScene {
  EventPeriod period;
  Annotation annotation;
};

PropellerEvents generate_propeller_events(const PropellerSpec& spec, const SensorGeometry& sensor,
                                          std::uint64_t duration_us, std::uint64_t seed);

std::vector<Event> generate_background_events(const BackgroundSpec& spec,
                                              const SensorGeometry& sensor,
                                              std::uint64_t duration_us, std::uint64_t seed);

/// Exactly `count` events, uniform in space, time and polarity.
std::vector<Event> generate_noise_events(std::size_t count, const SensorGeometry& sensor,
                                         std::uint64_t duration_us, std::uint64_t seed);

/// Merged, time-sorted period starting at t = 0, plus one truth box per propeller.
GeneratedScene generate_scene(const SynthScene& scene);

/// One propeller (rpm 8k-12k, radius 30-80 px, fully inside a 640x480 frame),
/// three moving bars and moderate noise over 20 ms.
SynthScene sample_positive_scene(std::uint64_t seed);

/// Same clutter as `sample_positive_scene` without a propeller.
SynthScene sample_negative_scene(std::uint64_t seed);

/// 640x480, 20 ms scene with a 10k RPM propeller, three bars and noise,
/// holding exactly `total_events` events.
EventPeriod make_bench_period(std::size_t total_events, std::uint64_t seed);

}  // namespace evdet
