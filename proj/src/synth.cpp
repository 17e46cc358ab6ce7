#include "evdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace evdet {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Independent streams per scene component.
enum class Stream : std::uint64_t { propeller = 1, background = 2, noise = 3, sampler = 4, bench = 5 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

double positive_mod(double a, double m) {
  const double r = std::fmod(a, m);
  return r < 0.0 ? r + m : r;
}

void stable_time_sort(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

}  // namespace

void PropellerSpec::validate(const SensorGeometry& sensor) const {
  if (!sensor.contains(static_cast<int>(std::floor(center.x)), static_cast<int>(std::floor(center.y))) ||
      center.x < 0.0 || center.y < 0.0) {
    throw ValidationError("propeller center outside sensor");
  }
  if (radius < 5.0) throw ValidationError("propeller radius must be >= 5 px");
  if (blades < 2) throw ValidationError("propeller needs at least 2 blades");
  if (rpm < kMinRpm || rpm > kMaxRpm) {
    throw ValidationError("propeller rpm must be in range 5000-15000");
  }
  if (!(events_per_edge >= 0.0)) throw ValidationError("events_per_edge must be >= 0");
  if (!(blade_width > 0.0) || blade_width >= kTwoPi / blades) {
    throw ValidationError("blade_width must be in (0, 2*pi/blades)");
  }
  if (contrast_modulation < 0.0 || contrast_modulation >= 1.0) {
    throw ValidationError("contrast_modulation must be in [0, 1)");
  }
  if (hub_radius < 0.0 || jitter_us < 0.0) throw ValidationError("hub_radius and jitter_us must be >= 0");
}

BBox PropellerSpec::truth_box(const SensorGeometry& sensor) const {
  const int x0 = static_cast<int>(std::lround(center.x - radius));
  const int y0 = static_cast<int>(std::lround(center.y - radius));
  const int side = static_cast<int>(std::lround(2.0 * radius));
  return BBox{x0, y0, side, side}.clamped(sensor);
}

void BackgroundSpec::validate() const {
  if (edge_count < 0 || speed < 0.0 || noise_rate < 0.0 || edge_length < 0.0 || bar_width < 0.0) {
    throw ValidationError("background parameters must be non-negative");
  }
}

PropellerEvents generate_propeller_events(const PropellerSpec& spec, const SensorGeometry& sensor,
                                          std::uint64_t duration_us, std::uint64_t seed) {
  spec.validate(sensor);
  auto rng = make_rng(seed, Stream::propeller);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double omega = spec.rpm * kTwoPi / 60.0e6;  // rad/us
  const double gap = kTwoPi / spec.blades;
  const double pass_us = gap / omega;
  const double trail_us = spec.blade_width / omega;
  const double duration = static_cast<double>(duration_us);
  const Polarity lead = spec.leading_positive ? Polarity::positive : Polarity::negative;

  PropellerEvents out{{}, spec.truth_box(sensor)};
  const int x0 = std::max(0, static_cast<int>(std::floor(spec.center.x - spec.radius)));
  const int x1 = std::min(sensor.width - 1, static_cast<int>(std::ceil(spec.center.x + spec.radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(spec.center.y - spec.radius)));
  const int y1 = std::min(sensor.height - 1, static_cast<int>(std::ceil(spec.center.y + spec.radius)));

  const auto emit = [&](double t_edge, double lambda, int x, int y, Polarity p) {
    if (lambda <= 0.0) return;
    std::poisson_distribution<int> count(lambda);
    const int k = count(rng);
    for (int i = 0; i < k; ++i) {
      const double t = t_edge + unit(rng) * spec.jitter_us;
      if (t < 0.0 || t >= duration) continue;
      out.events.push_back({static_cast<std::uint64_t>(t), static_cast<std::uint16_t>(x),
                            static_cast<std::uint16_t>(y), p});
    }
  };

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - spec.center.x;
      const double dy = y - spec.center.y;
      const double r = std::hypot(dx, dy);
      if (r >= spec.radius || r < spec.hub_radius) continue;
      const double phi = std::atan2(dy, dx);
      const double lambda =
          spec.events_per_edge * (1.0 + spec.contrast_modulation * std::cos(spec.blades * phi));
      // First leading-edge arrival after t = 0, stepped back one pass so a
      // trailing edge whose leading edge precedes the window is still seen.
      const double first = positive_mod(phi - spec.phase, gap) / omega - pass_us;
      for (double t = first; t < duration; t += pass_us) {
        emit(t, lambda, x, y, lead);
        emit(t + trail_us, lambda, x, y, flipped(lead));
      }
    }
  }
  stable_time_sort(out.events);
  return out;
}

std::vector<Event> generate_noise_events(std::size_t count, const SensorGeometry& sensor,
                                         std::uint64_t duration_us, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::noise);
  std::uniform_int_distribution<std::uint64_t> t_dist(0, duration_us - 1);
  std::uniform_int_distribution<int> x_dist(0, sensor.width - 1);
  std::uniform_int_distribution<int> y_dist(0, sensor.height - 1);
  std::bernoulli_distribution pol(0.5);
  std::vector<Event> events;
  events.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto t = t_dist(rng);
    const auto x = static_cast<std::uint16_t>(x_dist(rng));
    const auto y = static_cast<std::uint16_t>(y_dist(rng));
    events.push_back({t, x, y, pol(rng) ? Polarity::positive : Polarity::negative});
  }
  stable_time_sort(events);
  return events;
}

std::vector<Event> generate_background_events(const BackgroundSpec& spec,
                                              const SensorGeometry& sensor,
                                              std::uint64_t duration_us, std::uint64_t seed) {
  spec.validate();
  std::vector<Event> events;
  const double duration = static_cast<double>(duration_us);
  const double speed_us = spec.speed / 1000.0;  // px/us
  const double jitter_us = 40.0;

  for (int e = 0; e < spec.edge_count && speed_us > 0.0; ++e) {
    auto rng = make_rng(seed, Stream::background, static_cast<std::uint64_t>(e));
    std::uniform_real_distribution<double> ux(0.0, sensor.width);
    std::uniform_real_distribution<double> uy(0.0, sensor.height);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double cx = ux(rng), cy = uy(rng);
    const double theta = angle(rng);
    const Vec2 along{std::cos(theta), std::sin(theta)};
    const Vec2 normal{-along.y, along.x};  // direction of travel
    const double half = spec.edge_length / 2.0;
    const double travel = speed_us * duration;

    // Bounding box of the swept parallelogram.
    double bx0 = 1e9, bx1 = -1e9, by0 = 1e9, by1 = -1e9;
    for (double a : {-half, half}) {
      for (double s : {-spec.bar_width, travel}) {
        const double px = cx + a * along.x + s * normal.x;
        const double py = cy + a * along.y + s * normal.y;
        bx0 = std::min(bx0, px);
        bx1 = std::max(bx1, px);
        by0 = std::min(by0, py);
        by1 = std::max(by1, py);
      }
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(bx0)));
    const int x1 = std::min(sensor.width - 1, static_cast<int>(std::ceil(bx1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(by0)));
    const int y1 = std::min(sensor.height - 1, static_cast<int>(std::ceil(by1)));

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double rx = x - cx, ry = y - cy;
        if (std::abs(rx * along.x + ry * along.y) > half) continue;
        const double s = rx * normal.x + ry * normal.y;
        // Bar occupies [v t - bar_width, v t] along the normal.
        const double t_lead = s / speed_us;
        const double t_trail = (s + spec.bar_width) / speed_us;
        for (auto [tc, p] : {std::pair{t_lead, Polarity::positive}, std::pair{t_trail, Polarity::negative}}) {
          const double t = tc + unit(rng) * jitter_us;
          if (tc < 0.0 || t >= duration) continue;
          events.push_back({static_cast<std::uint64_t>(t), static_cast<std::uint16_t>(x),
                            static_cast<std::uint16_t>(y), p});
        }
      }
    }
  }

  if (spec.noise_rate > 0.0) {
    auto rng = make_rng(seed, Stream::noise, 1);
    std::poisson_distribution<long long> count(spec.noise_rate * duration / 1000.0);
    const auto n = static_cast<std::size_t>(count(rng));
    auto noise = generate_noise_events(n, sensor, duration_us, seed ^ 0x9e3779b97f4a7c15ULL);
    events.insert(events.end(), noise.begin(), noise.end());
  }
  stable_time_sort(events);
  return events;
}

GeneratedScene generate_scene(const SynthScene& scene) {
  scene.sensor.validate();
  if (scene.duration_us == 0) throw ValidationError("scene duration must be > 0");

  std::vector<Event> events =
      generate_background_events(scene.background, scene.sensor, scene.duration_us, scene.seed);
  Annotation annotation{scene.name, scene.sensor, scene.duration_us, {}};
  for (std::size_t i = 0; i < scene.propellers.size(); ++i) {
    auto prop = generate_propeller_events(scene.propellers[i], scene.sensor, scene.duration_us,
                                          scene.seed * 1000003ULL + i);
    events.insert(events.end(), prop.events.begin(), prop.events.end());
    annotation.boxes.push_back({prop.truth, std::nullopt, std::nullopt});
  }
  stable_time_sort(events);
  return {EventPeriod(std::move(events), 0, scene.duration_us, scene.sensor), std::move(annotation)};
}

SynthScene sample_negative_scene(std::uint64_t seed) {
  SynthScene scene;
  scene.seed = seed;
  scene.duration_us = 20000;
  scene.background = BackgroundSpec{3, 2.0, 20.0, 120.0, 6.0};
  scene.name = "scene_" + std::to_string(seed);
  return scene;
}

SynthScene sample_positive_scene(std::uint64_t seed) {
  SynthScene scene = sample_negative_scene(seed);
  auto rng = make_rng(seed, Stream::sampler);
  PropellerSpec prop;
  prop.rpm = std::uniform_real_distribution<double>(8000.0, 12000.0)(rng);
  prop.radius = std::uniform_real_distribution<double>(30.0, 80.0)(rng);
  const double margin = prop.radius + 2.0;
  prop.center = {std::uniform_real_distribution<double>(margin, scene.sensor.width - margin)(rng),
                 std::uniform_real_distribution<double>(margin, scene.sensor.height - margin)(rng)};
  prop.phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
  scene.propellers.push_back(prop);
  return scene;
}

EventPeriod make_bench_period(std::size_t total_events, std::uint64_t seed) {
  const SensorGeometry sensor{640, 480};
  constexpr std::uint64_t duration = 20000;

  PropellerSpec prop;
  prop.center = {320.0, 240.0};
  prop.radius = 60.0;
  prop.rpm = 10000.0;
  // About 60% of the budget from the propeller: pixels * passes * 2 edges * lambda.
  const double disc_px = std::numbers::pi * prop.radius * prop.radius;
  const double passes = prop.blade_pass_hz() * duration * 1e-6;
  prop.events_per_edge = std::max(0.5, 0.6 * static_cast<double>(total_events) / (disc_px * passes * 2.0));

  std::vector<Event> events = generate_propeller_events(prop, sensor, duration, seed).events;
  const auto bars = generate_background_events(BackgroundSpec{3, 2.0, 0.0, 120.0, 6.0}, sensor,
                                               duration, seed);
  events.insert(events.end(), bars.begin(), bars.end());
  if (events.size() > total_events) {
    // Keep a deterministic, evenly spread subset.
    auto rng = make_rng(seed, Stream::bench);
    std::shuffle(events.begin(), events.end(), rng);
    events.resize(total_events);
  } else {
    const auto noise = generate_noise_events(total_events - events.size(), sensor, duration, seed + 17);
    events.insert(events.end(), noise.begin(), noise.end());
  }
  stable_time_sort(events);
  return EventPeriod(std::move(events), 0, duration, sensor);
}

}  // namespace evdet
