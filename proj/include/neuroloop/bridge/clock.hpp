#pragma once

#include <cstdint>

namespace neuroloop::bridge {

// Four-timestamp exchange, µs: client send t1, server receive t2, server send
// t3, client receive t4. offset is server clock minus client clock.
struct ClockSync {
  std::int64_t t1 = 0, t2 = 0, t3 = 0, t4 = 0;
  double offset = 0.0;
  std::int64_t round_trip = 0;
};

// ClockAnomaly when t4 < t1, t3 < t2 or the round trip is negative.
ClockSync estimate_offset(std::int64_t t1, std::int64_t t2, std::int64_t t3, std::int64_t t4);

// Microseconds on a process-wide monotonic clock.
std::int64_t monotonic_micros();

}  // namespace neuroloop::bridge
