#include "neuroloop/bridge/clock.hpp"

#include <chrono>

#include "neuroloop/errors.hpp"

namespace neuroloop::bridge {

ClockSync estimate_offset(std::int64_t t1, std::int64_t t2, std::int64_t t3, std::int64_t t4) {
  if (t4 < t1) throw ClockAnomaly("clock sync: t4 precedes t1");
  if (t3 < t2) throw ClockAnomaly("clock sync: t3 precedes t2");
  ClockSync c{t1, t2, t3, t4, 0.0, 0};
  c.round_trip = (t4 - t1) - (t3 - t2);
  if (c.round_trip < 0) throw ClockAnomaly("clock sync: negative round trip");
  c.offset = 0.5 * (static_cast<double>(t2 - t1) + static_cast<double>(t3 - t4));
  return c;
}

std::int64_t monotonic_micros() {
  static const auto epoch = std::chrono::steady_clock::now();
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - epoch)
      .count();
}

}  // namespace neuroloop::bridge
