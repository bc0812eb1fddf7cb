#include "neuroloop/adapt/adapt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "neuroloop/errors.hpp"

namespace neuroloop::adapt {

const char* to_string(Significance s) {
  switch (s) {
    case Significance::Up: return "Up";
    case Significance::Down: return "Down";
    case Significance::Neutral: return "Neutral";
  }
  return "?";
}

const char* to_string(Policy p) {
  switch (p) {
    case Policy::Positive: return "Positive";
    case Policy::Negative: return "Negative";
    case Policy::None: return "None";
  }
  return "?";
}

const char* to_string(Action a) {
  switch (a) {
    case Action::Increase: return "Increase";
    case Action::Decrease: return "Decrease";
    case Action::Hold: return "Hold";
  }
  return "?";
}

Policy policy_from_string(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "positive") return Policy::Positive;
  if (l == "negative") return Policy::Negative;
  if (l == "none") return Policy::None;
  throw ConfigurationError("unknown policy: " + s);
}

int stream_delta(Action a) {
  switch (a) {
    case Action::Increase: return 16;
    case Action::Decrease: return -8;
    case Action::Hold: return 0;
  }
  return 0;
}

StreamState StreamState::starting_at(double initial, double floor, double ceiling) {
  StreamState s{initial, floor, ceiling, initial};
  s.validate();
  return s;
}

void StreamState::validate() const {
  if (!(floor > 0.0)) throw ConfigurationError("stream floor must be > 0");
  if (!(floor <= ceiling)) throw ConfigurationError("stream floor must not exceed the ceiling");
  if (!(floor <= current && current <= ceiling)) {
    throw ConfigurationError("stream value outside [floor, ceiling]");
  }
  if (!(floor <= initial && initial <= ceiling)) {
    throw ConfigurationError("initial stream outside [floor, ceiling]");
  }
}

double relative_change(double p1, double p2) {
  if (!(p1 > kBaselineEpsilon)) throw DegenerateBaseline("relative_change: baseline power ~ 0");
  return (p2 - p1) / p1;
}

namespace {
Significance significance(double delta, double threshold) {
  if (delta >= threshold) return Significance::Up;
  if (delta <= -threshold) return Significance::Down;
  return Significance::Neutral;
}
}  // namespace

BandTrend classify_trend(double delta_alpha, double delta_theta, double threshold) {
  if (!(threshold > 0.0)) throw InvalidParameter("classify_trend: threshold must be > 0");
  return {delta_alpha, delta_theta, significance(delta_alpha, threshold),
          significance(delta_theta, threshold), threshold};
}

Action decide(const BandTrend& trend, Policy policy) {
  using S = Significance;
  if (trend.alpha_sig == S::Neutral || trend.theta_sig == S::Neutral) return Action::Hold;
  const bool alpha_up = trend.alpha_sig == S::Up;
  const bool theta_up = trend.theta_sig == S::Up;
  switch (policy) {
    case Policy::Positive:
      // Alpha direction alone decides once both bands are significant.
      return alpha_up ? Action::Increase : Action::Decrease;
    case Policy::Negative:
      return (alpha_up && !theta_up) ? Action::Decrease : Action::Increase;
    case Policy::None:
      return Action::Hold;
  }
  return Action::Hold;
}

StreamState apply_action(StreamState state, Action action) {
  state.current = std::clamp(state.current + stream_delta(action), state.floor, state.ceiling);
  return state;
}

AdaptationEngine::AdaptationEngine(EngineConfig config) : config_(config), stream_(config.stream) {
  if (!(config_.threshold > 0.0)) throw ConfigurationError("threshold must be > 0");
  stream_.validate();
}

std::optional<AdaptationDecision> AdaptationEngine::step(const BandPowerWindow& w2) {
  if (!(w2.duration > 0.0)) throw SequencingError("window duration must be > 0");
  if (w2.alpha_power < 0.0 || w2.theta_power < 0.0) throw InvalidParameter("negative band power");
  if (!windows_.empty()) {
    const auto& w1 = windows_.back();
    const double tol = 1e-6 * std::max(1.0, w1.duration);
    if (w2.index != w1.index + 1) throw SequencingError("window index is not consecutive");
    if (std::abs(w2.start_time - w1.end_time()) > tol) {
      throw SequencingError(w2.start_time < w1.end_time() ? "window overlaps its predecessor"
                                                          : "window does not follow its predecessor");
    }
  }
  windows_.push_back(w2);
  if (windows_.size() < 2 || config_.policy == Policy::None) return std::nullopt;
  const auto& w1 = windows_[windows_.size() - 2];

  AdaptationDecision d;
  d.window_index = w2.index;
  d.t = w2.end_time();
  d.policy = config_.policy;
  d.alpha_power = w2.alpha_power;
  d.theta_power = w2.theta_power;
  try {
    d.trend = classify_trend(relative_change(w1.alpha_power, w2.alpha_power),
                             relative_change(w1.theta_power, w2.theta_power), config_.threshold);
    d.action = decide(d.trend, config_.policy);
  } catch (const DegenerateBaseline&) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    d.trend = BandTrend{nan, nan, Significance::Neutral, Significance::Neutral, config_.threshold};
    d.action = Action::Hold;
    d.degenerate_baseline = true;
  }
  stream_ = apply_action(stream_, d.action);
  d.stream_after = stream_.current;
  log_.push_back(d);
  return d;
}

nlohmann::json to_json(const AdaptationDecision& d) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["t"] = d.t;
  j["window_index"] = d.window_index;
  j["delta_alpha"] = num(d.trend.delta_alpha);
  j["delta_theta"] = num(d.trend.delta_theta);
  j["alpha_sig"] = to_string(d.trend.alpha_sig);
  j["theta_sig"] = to_string(d.trend.theta_sig);
  j["policy"] = to_string(d.policy);
  j["action"] = to_string(d.action);
  j["stream_after"] = d.stream_after;
  j["alpha_power"] = d.alpha_power;
  j["theta_power"] = d.theta_power;
  if (d.degenerate_baseline) j["degenerate_baseline"] = true;
  return j;
}

AdaptationDecision decision_from_json(const nlohmann::json& j) {
  auto sig = [](const std::string& s) {
    if (s == "Up") return Significance::Up;
    if (s == "Down") return Significance::Down;
    return Significance::Neutral;
  };
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  AdaptationDecision d;
  d.t = j.at("t").get<double>();
  d.window_index = j.at("window_index").get<std::size_t>();
  d.trend.delta_alpha = num(j.at("delta_alpha"));
  d.trend.delta_theta = num(j.at("delta_theta"));
  d.trend.alpha_sig = sig(j.at("alpha_sig").get<std::string>());
  d.trend.theta_sig = sig(j.at("theta_sig").get<std::string>());
  d.policy = policy_from_string(j.at("policy").get<std::string>());
  const auto a = j.at("action").get<std::string>();
  d.action = a == "Increase" ? Action::Increase : a == "Decrease" ? Action::Decrease : Action::Hold;
  d.stream_after = j.at("stream_after").get<double>();
  d.alpha_power = j.value("alpha_power", 0.0);
  d.theta_power = j.value("theta_power", 0.0);
  d.degenerate_baseline = j.value("degenerate_baseline", false);
  return d;
}

}  // namespace neuroloop::adapt
