#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace neuroloop::adapt {

enum class Significance { Up, Down, Neutral };
enum class Policy { Positive, Negative, None };
enum class Action { Increase, Decrease, Hold };

const char* to_string(Significance s);
const char* to_string(Policy p);
const char* to_string(Action a);
Policy policy_from_string(const std::string& s);

// Change in NPCs per minute: +16, -8 or 0.
int stream_delta(Action a);

inline constexpr double kDefaultThreshold = 0.15;
inline constexpr double kBaselineEpsilon = 1e-12;

struct BandPowerWindow {
  std::size_t index = 0;
  double start_time = 0.0;
  double duration = 20.0;
  double alpha_power = 0.0;
  double theta_power = 0.0;

  double end_time() const { return start_time + duration; }
};

struct BandTrend {
  double delta_alpha = 0.0;
  double delta_theta = 0.0;
  Significance alpha_sig = Significance::Neutral;
  Significance theta_sig = Significance::Neutral;
  double threshold = kDefaultThreshold;
};

struct StreamState {
  double current = 115.0;
  double floor = 8.0;
  double ceiling = 400.0;
  double initial = 115.0;

  static StreamState starting_at(double initial, double floor = 8.0, double ceiling = 400.0);
  void validate() const;
};

struct AdaptationDecision {
  std::size_t window_index = 0;
  double t = 0.0;  // end of w2 on the session clock, seconds
  BandTrend trend;
  Policy policy = Policy::Positive;
  Action action = Action::Hold;
  double stream_after = 0.0;
  double alpha_power = 0.0;  // w2
  double theta_power = 0.0;  // w2
  bool degenerate_baseline = false;
};

// (p2 - p1) / p1; DegenerateBaseline when p1 <= 1e-12.
double relative_change(double p1, double p2);

// |delta| == threshold counts as significant.
BandTrend classify_trend(double delta_alpha, double delta_theta, double threshold = kDefaultThreshold);

// Positive: (Up,Up)+16 (Down,Down)-8 (Down,Up)-8 (Up,Down)+16.
// Negative: (Down,Down)+16 (Down,Up)+16 (Up,Up)+16 (Up,Down)-8.
// Any Neutral band, or Policy::None, holds.
Action decide(const BandTrend& trend, Policy policy);

StreamState apply_action(StreamState state, Action action);

struct EngineConfig {
  Policy policy = Policy::Positive;
  double threshold = kDefaultThreshold;
  StreamState stream{};
};

// Compares each completed tumbling window with its predecessor. One engine per
// session, driven from a single thread.
class AdaptationEngine {
 public:
  explicit AdaptationEngine(EngineConfig config);

  // No decision for the first window or under Policy::None.
  std::optional<AdaptationDecision> step(const BandPowerWindow& completed);

  const StreamState& stream() const { return stream_; }
  const EngineConfig& config() const { return config_; }
  const std::vector<AdaptationDecision>& log() const { return log_; }
  const std::vector<BandPowerWindow>& windows() const { return windows_; }

 private:
  EngineConfig config_;
  StreamState stream_;
  std::vector<BandPowerWindow> windows_;
  std::vector<AdaptationDecision> log_;
};

// Session-log record: t, window_index, delta_alpha, delta_theta, alpha_sig,
// theta_sig, policy, action, stream_after, plus alpha_power/theta_power.
nlohmann::json to_json(const AdaptationDecision& d);
AdaptationDecision decision_from_json(const nlohmann::json& j);

}  // namespace neuroloop::adapt
