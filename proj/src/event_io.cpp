#include "evdet/event_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

namespace evdet {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_integer(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

struct DeclaredBounds {
  std::optional<std::uint64_t> t_start;
  std::optional<std::uint64_t> duration;
};

// "# t_start_us=0 duration_us=20000 width=640 height=480"; unknown keys are ignored.
void parse_metadata(std::string_view line, DeclaredBounds& bounds, std::size_t line_no) {
  line.remove_prefix(1);
  std::istringstream tokens{std::string(line)};
  std::string tok;
  while (tokens >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    std::uint64_t value = 0;
    if (key != "t_start_us" && key != "duration_us") continue;
    if (!parse_integer(std::string_view(tok).substr(eq + 1), value)) {
      throw ParseError("bad value for '" + key + "'", line_no);
    }
    (key == "t_start_us" ? bounds.t_start : bounds.duration) = value;
  }
}

EventPeriod finish_period(std::vector<Event> events, DeclaredBounds declared,
                          const SensorGeometry& sensor, const LoadOptions& opts) {
  if (opts.t_start) declared.t_start = opts.t_start;
  if (opts.duration) declared.duration = opts.duration;

  std::uint64_t t_start = 0;
  if (declared.t_start) {
    t_start = *declared.t_start;
  } else if (!events.empty()) {
    t_start = std::min_element(events.begin(), events.end(),
                               [](const Event& a, const Event& b) { return a.t < b.t; })
                  ->t;
  }

  std::uint64_t duration = 0;
  if (declared.duration) {
    duration = *declared.duration;
  } else if (!events.empty()) {
    const auto t_max = std::max_element(events.begin(), events.end(),
                                        [](const Event& a, const Event& b) { return a.t < b.t; })
                           ->t;
    if (t_max < t_start) throw ValidationError("events precede the declared period start");
    duration = t_max - t_start + 1;
  } else {
    duration = kDefaultPeriodUs;
  }
  return EventPeriod(std::move(events), t_start, duration, sensor);
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

EventPeriod parse_events_csv(std::istream& in, const SensorGeometry& sensor,
                             const LoadOptions& opts) {
  sensor.validate();
  DeclaredBounds declared;
  std::vector<Event> events;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_data = false;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      parse_metadata(line, declared, line_no);
      continue;
    }
    if (!seen_data && line.starts_with("t_us")) {
      seen_data = true;
      continue;
    }
    seen_data = true;

    std::array<std::string_view, 4> fields;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      if (count == fields.size()) throw ParseError("expected 4 fields (t_us,x,y,p)", line_no);
      fields[count++] = line.substr(start, comma == std::string_view::npos ? comma : comma - start);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (count != 4) throw ParseError("expected 4 fields (t_us,x,y,p)", line_no);

    std::uint64_t t = 0;
    long long x = 0, y = 0;
    unsigned p = 0;
    if (!parse_integer(fields[0], t)) throw ParseError("bad timestamp '" + std::string(fields[0]) + "'", line_no);
    if (!parse_integer(fields[1], x)) {
      throw ParseError("bad x '" + std::string(fields[1]) + "'", line_no);
    }
    if (!parse_integer(fields[2], y)) throw ParseError("bad y '" + std::string(fields[2]) + "'", line_no);
    if (!parse_integer(fields[3], p) || p > 1) {
      throw ParseError("polarity must be 0 or 1, got '" + std::string(fields[3]) + "'", line_no);
    }
    if (x < 0 || y < 0 || x >= sensor.width || y >= sensor.height) {
      throw ValidationError("line " + std::to_string(line_no) + ": coordinate (" + std::to_string(x) +
                            "," + std::to_string(y) + ") outside " + std::to_string(sensor.width) +
                            "x" + std::to_string(sensor.height) + " sensor");
    }
    events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                           p ? Polarity::positive : Polarity::negative});
  }
  return finish_period(std::move(events), declared, sensor, opts);
}

EventPeriod parse_events_binary(std::istream& in, const SensorGeometry& sensor,
                                const LoadOptions& opts) {
  std::array<unsigned char, kBinaryHeaderSize> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size())) {
    throw ParseError("truncated binary event header");
  }
  if (std::memcmp(header.data(), kBinaryMagic, 4) != 0) throw ParseError("bad binary event magic");

  const SensorGeometry declared_sensor{get_le<std::uint16_t>(header.data() + 4),
                                       get_le<std::uint16_t>(header.data() + 6)};
  if (declared_sensor != sensor) {
    throw ValidationError("binary file geometry " + std::to_string(declared_sensor.width) + "x" +
                          std::to_string(declared_sensor.height) + " does not match sensor " +
                          std::to_string(sensor.width) + "x" + std::to_string(sensor.height));
  }
  DeclaredBounds declared{get_le<std::uint64_t>(header.data() + 8),
                          get_le<std::uint64_t>(header.data() + 16)};

  std::vector<Event> events;
  std::array<unsigned char, kBinaryRecordSize> rec{};
  std::size_t index = 0;
  while (in.read(reinterpret_cast<char*>(rec.data()), rec.size())) {
    const Event e{get_le<std::uint64_t>(rec.data()), get_le<std::uint16_t>(rec.data() + 8),
                  get_le<std::uint16_t>(rec.data() + 10),
                  rec[12] ? Polarity::positive : Polarity::negative};
    if (rec[12] > 1) throw ParseError("record " + std::to_string(index) + ": polarity byte > 1");
    if (!sensor.contains(e.x, e.y)) {
      throw ValidationError("record " + std::to_string(index) + ": coordinate (" +
                            std::to_string(e.x) + "," + std::to_string(e.y) + ") outside sensor");
    }
    events.push_back(e);
    ++index;
  }
  if (in.gcount() != 0) throw ParseError("truncated binary event record " + std::to_string(index));
  return finish_period(std::move(events), declared, sensor, opts);
}

EventPeriod load_events(const std::filesystem::path& path, const SensorGeometry& sensor,
                        const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open event file " + path.string());

  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0;
  in.clear();
  in.seekg(0);

  try {
    return binary ? parse_events_binary(in, sensor, opts) : parse_events_csv(in, sensor, opts);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.line());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_events_csv(const EventPeriod& period, std::ostream& out) {
  out << "# t_start_us=" << period.t_start() << " duration_us=" << period.duration()
      << " width=" << period.sensor().width << " height=" << period.sensor().height << "\n";
  out << "t_us,x,y,p\n";
  for (const Event& e : period.events()) {
    out << e.t << ',' << e.x << ',' << e.y << ',' << (e.p == Polarity::positive ? 1 : 0) << '\n';
  }
}

void write_events_binary(const EventPeriod& period, std::ostream& out) {
  out.write(kBinaryMagic, 4);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(period.sensor().width));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(period.sensor().height));
  put_le<std::uint64_t>(out, period.t_start());
  put_le<std::uint64_t>(out, period.duration());
  constexpr char pad[3] = {0, 0, 0};
  for (const Event& e : period.events()) {
    put_le<std::uint64_t>(out, e.t);
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    put_le<std::uint8_t>(out, e.p == Polarity::positive ? 1 : 0);
    out.write(pad, 3);
  }
}

void write_events(const EventPeriod& period, const std::filesystem::path& path, EventFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (format == EventFormat::binary) {
    write_events_binary(period, out);
  } else {
    write_events_csv(period, out);
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

EventFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".bin" || ext == ".evd") ? EventFormat::binary : EventFormat::csv;
}

}  // namespace evdet
