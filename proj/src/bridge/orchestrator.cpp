#include "neuroloop/bridge/orchestrator.hpp"

#include <algorithm>
#include <cctype>

#include "neuroloop/dsp/montage.hpp"
#include "neuroloop/errors.hpp"

namespace neuroloop::bridge {

using nlohmann::json;

const char* to_string(BlockKind b) {
  switch (b) {
    case BlockKind::IAF: return "IAF";
    case BlockKind::Resting: return "Resting";
    case BlockKind::VisualMonitoring: return "VisualMonitoring";
    case BlockKind::NBackNoAdapt: return "NBackNoAdapt";
    case BlockKind::NBackPositive: return "NBackPositive";
    case BlockKind::NBackNegative: return "NBackNegative";
  }
  return "?";
}

BlockKind block_from_string(const std::string& s) {
  std::string l;
  for (char c : s) {
    if (c != '_' && c != '-' && c != ' ') l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (l == "iaf") return BlockKind::IAF;
  if (l == "resting") return BlockKind::Resting;
  if (l == "visualmonitoring") return BlockKind::VisualMonitoring;
  if (l == "nbacknoadapt") return BlockKind::NBackNoAdapt;
  if (l == "nbackpositive") return BlockKind::NBackPositive;
  if (l == "nbacknegative") return BlockKind::NBackNegative;
  throw ConfigurationError("unknown block: " + s);
}

adapt::Policy block_policy(BlockKind b) {
  if (b == BlockKind::NBackPositive) return adapt::Policy::Positive;
  if (b == BlockKind::NBackNegative) return adapt::Policy::Negative;
  return adapt::Policy::None;
}

double default_block_seconds(BlockKind b) { return b == BlockKind::IAF ? 130.0 : 360.0; }

void SessionConfig::validate() const {
  if (!(threshold > 0.0)) throw ConfigurationError("threshold must be > 0");
  if (!(window_s > 0.0)) throw ConfigurationError("window_s must be > 0");
  if (!(sample_rate > 0.0)) throw ConfigurationError("sample_rate must be > 0");
  stream.validate();
  if (channel_labels.empty()) throw ConfigurationError("session has no channels");
}

SessionConfig resolve(SessionConfig c) {
  if (c.channel_labels.empty()) c.channel_labels = dsp::montage_labels(c.montage);
  c.validate();
  return c;
}

SessionOrchestrator::SessionOrchestrator(SessionConfig config)
    : config_(resolve(std::move(config))), stream_(config_.stream.initial) {}

adapt::Policy SessionOrchestrator::current_policy() const { return active_ ? policy_ : adapt::Policy::None; }

double SessionOrchestrator::stream() const { return stream_; }

iaf::IndividualBands SessionOrchestrator::bands() const {
  return bands_ ? *bands_ : iaf::IndividualBands::canonical();
}

std::vector<json> SessionOrchestrator::take_pending_events() { return std::exchange(pending_, {}); }

adapt::PipelineConfig SessionOrchestrator::pipeline_config(adapt::Policy policy) const {
  adapt::PipelineConfig p;
  p.sample_rate = config_.sample_rate;
  p.window_s = config_.window_s;
  p.bands = bands();
  p.prime_seconds = config_.prime_seconds;
  p.engine.policy = policy;
  p.engine.threshold = config_.threshold;
  p.engine.stream = adapt::StreamState::starting_at(config_.stream.initial, config_.stream.floor,
                                                    config_.stream.ceiling);
  return p;
}

namespace {
json bands_json(const iaf::IndividualBands& b) {
  return {{"theta", {b.theta.low, b.theta.high}}, {"alpha", {b.alpha.low, b.alpha.high}}};
}
}  // namespace

void SessionOrchestrator::begin(std::optional<BlockKind> kind, adapt::Policy policy) {
  if (policy != adapt::Policy::None && !bands_ && !config_.allow_fallback_bands) {
    throw ConfigurationError("adaptive block requested before IAF bands are available");
  }
  pipeline_.reset();
  iaf_chunks_.clear();
  block_ = kind;
  policy_ = policy;
  active_ = true;
  if (kind == BlockKind::VisualMonitoring) {
    stream_ = kVisualMonitoringStream;
  } else {
    stream_ = config_.stream.initial;
  }
  if (policy != adapt::Policy::None) pipeline_ = std::make_unique<adapt::OnlinePipeline>(pipeline_config(policy));
}

std::vector<json> SessionOrchestrator::start_block(BlockKind kind, double t) {
  auto events = end_block(t);
  begin(kind, block_policy(kind));
  events.push_back({{"event", "block_start"},
                    {"block", to_string(kind)},
                    {"t", t},
                    {"policy", adapt::to_string(policy_)},
                    {"stream", stream_},
                    {"bands", bands_json(bands())}});
  return events;
}

std::vector<json> SessionOrchestrator::end_block(double t) {
  if (!active_) return {};
  std::vector<json> events;
  if (block_ == BlockKind::IAF) {
    iaf::IafConfig cfg;
    iaf::IafEstimate est{0.5 * (cfg.fallback_low + cfg.fallback_high), 0.0, cfg.fallback_low,
                         cfg.fallback_high, iaf::IafQuality::Fallback};
    std::string note;
    try {
      if (iaf_chunks_.empty()) throw InsufficientData("no IAF data");
      const auto rec = dsp::concatenate(iaf_chunks_);
      est = iaf::estimate_iaf_raw(rec, dsp::ChannelSet::alpha_posterior(), cfg);
      bands_ = iaf::derive_bands(est);
    } catch (const Error& e) {
      // keep the canonical bands; the block is reported with quality fallback
      est.quality = iaf::IafQuality::Fallback;
      est.f_low = cfg.fallback_low;
      est.f_high = cfg.fallback_high;
      bands_ = iaf::IndividualBands::canonical();
      note = e.what();
    }
    iaf_ = est;
    json ev = {{"event", "iaf"},     {"t", t},           {"paf", est.paf},
               {"cog", est.cog},     {"f_low", est.f_low}, {"f_high", est.f_high},
               {"quality", iaf::to_string(est.quality)}, {"bands", bands_json(*bands_)}};
    if (!note.empty()) ev["note"] = note;
    events.push_back(ev);
  }
  json end = {{"event", "block_end"}, {"block", block_ ? to_string(*block_) : "implicit"}, {"t", t}};
  end["stream"] = stream_;
  events.push_back(end);
  active_ = false;
  block_.reset();
  pipeline_.reset();
  iaf_chunks_.clear();
  return events;
}

std::vector<adapt::AdaptationDecision> SessionOrchestrator::ingest(const dsp::EegChunk& chunk) {
  if (!active_) {
    begin(std::nullopt, config_.policy);
    pending_.push_back({{"event", "block_start"},
                        {"block", "implicit"},
                        {"t", chunk.start_time()},
                        {"policy", adapt::to_string(policy_)},
                        {"stream", stream_},
                        {"bands", bands_json(bands())}});
  }
  if (block_ == BlockKind::IAF) {
    iaf_chunks_.push_back(chunk.select(dsp::ChannelSet::alpha_posterior().labels));
    return {};
  }
  if (!pipeline_) return {};
  auto out = pipeline_->ingest(chunk);
  for (const auto& d : out) {
    stream_ = d.stream_after;
    decisions_.push_back(d);
  }
  return out;
}

PlanResult run_plan(const SessionConfig& config, const std::vector<BlockSpec>& plan,
                    const std::function<std::optional<dsp::EegChunk>()>& next) {
  for (const auto& b : plan) {
    if (!(b.duration_s > 0.0)) throw ConfigurationError("block durations must be > 0");
  }
  SessionOrchestrator orch(config);
  PlanResult result;
  auto add = [&](std::vector<json> evs) {
    for (auto& e : evs) result.events.push_back(std::move(e));
  };
  std::vector<double> edges = {0.0};
  for (const auto& b : plan) edges.push_back(edges.back() + b.duration_s);

  std::optional<double> t0;
  std::size_t current = plan.size();
  double last_end = 0.0;
  const double half = 0.5 / config.sample_rate;
  while (auto chunk = next()) {
    if (!t0) t0 = chunk->start_time();
    const double rel = chunk->start_time() - *t0;
    std::size_t k = 0;
    while (k < plan.size() && rel >= edges[k + 1] - half) ++k;
    if (k >= plan.size()) break;
    if (k != current) {
      add(orch.start_block(plan[k].kind, *t0 + edges[k]));
      current = k;
    }
    orch.ingest(*chunk);
    last_end = chunk->end_time();
  }
  if (t0) add(orch.end_block(last_end));
  result.decisions = orch.decisions();
  result.iaf = orch.iaf_estimate();
  result.bands = orch.bands();
  return result;
}

std::vector<adapt::AdaptationDecision> replay(const SessionConfig& config,
                                              std::span<const dsp::EegChunk> chunks) {
  SessionOrchestrator orch(config);
  for (const auto& c : chunks) orch.ingest(c);
  return orch.decisions();
}

}  // namespace neuroloop::bridge
