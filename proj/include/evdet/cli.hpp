#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace evdet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitIo = 2;

/// Entry point for `mavdet <detect|synth|eval|bench> [flags]`. `args`
/// excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchResult {
  std::size_t events = 0;
  int reps = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::size_t detections = 0;
};

/// Times detect_period on a generated 640x480, 20 ms scene of `events` events.
BenchResult run_bench(std::size_t events, int reps, unsigned long long seed);
std::string bench_to_json(const BenchResult& r);

}  // namespace evdet::cli
