#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "evdet/event_model.hpp"

namespace evdet {

enum class EventFormat { csv, binary };

/// Period bounds that override whatever the file declares.
struct LoadOptions {
  std::optional<std::uint64_t> t_start;
  std::optional<std::uint64_t> duration;
};

/// Reads a CSV or binary ("EVD1") event file; the format is sniffed from the
/// first four bytes.
///
/// CSV files may begin with `#` metadata lines such as
/// `# t_start_us=0 duration_us=20000`, followed by an optional `t_us,x,y,p`
/// header. When neither the file nor `opts` fixes the period, it spans the
/// first to the last event, or `kDefaultPeriodUs` from zero when there are
/// no events. Binary files carry geometry in their header; it
/// must agree with `sensor`.
EventPeriod load_events(const std::filesystem::path& path, const SensorGeometry& sensor,
                        const LoadOptions& opts = {});

EventPeriod parse_events_csv(std::istream& in, const SensorGeometry& sensor,
                             const LoadOptions& opts = {});
EventPeriod parse_events_binary(std::istream& in, const SensorGeometry& sensor,
                                const LoadOptions& opts = {});

void write_events(const EventPeriod& period, const std::filesystem::path& path, EventFormat format);
void write_events_csv(const EventPeriod& period, std::ostream& out);
void write_events_binary(const EventPeriod& period, std::ostream& out);

/// `.bin`/`.evd` map to binary, everything else to CSV.
EventFormat format_for_path(const std::filesystem::path& path);

inline constexpr std::uint64_t kDefaultPeriodUs = 20000;

inline constexpr char kBinaryMagic[4] = {'E', 'V', 'D', '1'};
inline constexpr std::size_t kBinaryHeaderSize = 24;
inline constexpr std::size_t kBinaryRecordSize = 16;

}  // namespace evdet
