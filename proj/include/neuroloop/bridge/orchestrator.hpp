#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuroloop/adapt/adapt.hpp"
#include "neuroloop/adapt/pipeline.hpp"
#include "neuroloop/dsp/eeg_chunk.hpp"
#include "neuroloop/iaf/iaf.hpp"

namespace neuroloop::bridge {

enum class BlockKind { IAF, Resting, VisualMonitoring, NBackNoAdapt, NBackPositive, NBackNegative };

const char* to_string(BlockKind b);
BlockKind block_from_string(const std::string& s);

// None for every block except the two adaptive N-Back blocks.
adapt::Policy block_policy(BlockKind b);
double default_block_seconds(BlockKind b);

inline constexpr double kVisualMonitoringStream = 334.0;

struct SessionConfig {
  adapt::Policy policy = adapt::Policy::Positive;  // used when no block was announced
  double threshold = adapt::kDefaultThreshold;
  double window_s = 20.0;
  adapt::StreamState stream{};
  std::string montage = "standard64";
  std::vector<std::string> channel_labels;  // from the montage when empty
  double sample_rate = 500.0;
  bool allow_fallback_bands = true;
  double prime_seconds = 2.0;

  void validate() const;
  const std::vector<std::string>& labels() const { return channel_labels; }
};

// Resolves montage labels and checks ranges.
SessionConfig resolve(SessionConfig config);

// Tracks the block structure of one session: which adaptation mode is active,
// the IAF result feeding later blocks, and the stream value shown to the client.
// Events are JSON objects {"event": ..., "t": ...} for the session log.
class SessionOrchestrator {
 public:
  explicit SessionOrchestrator(SessionConfig config);

  std::vector<nlohmann::json> start_block(BlockKind kind, double t);
  std::vector<nlohmann::json> end_block(double t);

  // Starts an implicit block with the session policy when none is active.
  std::vector<adapt::AdaptationDecision> ingest(const dsp::EegChunk& chunk);

  std::optional<BlockKind> current_block() const { return block_; }
  bool in_block() const { return active_; }
  adapt::Policy current_policy() const;
  double stream() const;
  iaf::IndividualBands bands() const;
  const std::optional<iaf::IafEstimate>& iaf_estimate() const { return iaf_; }
  const std::vector<adapt::AdaptationDecision>& decisions() const { return decisions_; }
  const SessionConfig& config() const { return config_; }
  // Events produced implicitly (implicit block start) since the last call.
  std::vector<nlohmann::json> take_pending_events();

 private:
  void begin(std::optional<BlockKind> kind, adapt::Policy policy);
  adapt::PipelineConfig pipeline_config(adapt::Policy policy) const;

  SessionConfig config_;
  bool active_ = false;
  std::optional<BlockKind> block_;
  adapt::Policy policy_ = adapt::Policy::None;
  std::unique_ptr<adapt::OnlinePipeline> pipeline_;
  std::vector<dsp::EegChunk> iaf_chunks_;
  std::optional<iaf::IafEstimate> iaf_;
  std::optional<iaf::IndividualBands> bands_;
  double stream_ = 115.0;
  std::vector<adapt::AdaptationDecision> decisions_;
  std::vector<nlohmann::json> pending_;
};

struct BlockSpec {
  BlockKind kind;
  double duration_s;
};

struct PlanResult {
  std::vector<nlohmann::json> events;
  std::vector<adapt::AdaptationDecision> decisions;
  std::optional<iaf::IafEstimate> iaf;
  iaf::IndividualBands bands;
};

// Offline orchestration: block k spans [t0 + sum of earlier durations, ...) from
// the first chunk's start; chunks are assigned by start time and stop after the
// plan ends. `next` returns nullopt when exhausted.
PlanResult run_plan(const SessionConfig& config, const std::vector<BlockSpec>& plan,
                    const std::function<std::optional<dsp::EegChunk>()>& next);

// What a live session with no block messages would decide for these chunks.
std::vector<adapt::AdaptationDecision> replay(const SessionConfig& config,
                                              std::span<const dsp::EegChunk> chunks);

}  // namespace neuroloop::bridge
