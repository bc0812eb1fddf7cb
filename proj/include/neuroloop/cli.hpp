#pragma once

#include <cstddef>
#include <iosfwd>

#include "json.hpp"
#include "neuroloop/dsp/exec.hpp"

namespace neuroloop {

struct LatencyStats {
  double window_s = 0.0;
  std::size_t channels = 0, iterations = 0;
  double min_ms = 0.0, median_ms = 0.0, p95_ms = 0.0, max_ms = 0.0, mean_ms = 0.0;
  double realtime_factor = 0.0;  // window length over the slowest window
};

// Times OnlinePipeline::ingest on back-to-back windows of simulated EEG: filter
// on every channel, Welch, band power and the engine step. The first window is
// a warm-up and not counted.
LatencyStats measure_window_latency(double window_s, std::size_t channels, std::size_t iterations,
                                    dsp::Exec exec = dsp::Exec::Parallel);
nlohmann::json to_json(const LatencyStats& s);

// Entry point of the `neuroloop` tool. 0 on success, 2 on usage errors, 1 on
// any other failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace neuroloop
