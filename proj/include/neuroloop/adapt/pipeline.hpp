#pragma once

#include <optional>
#include <string>
#include <vector>

#include "neuroloop/adapt/adapt.hpp"
#include "neuroloop/dsp/eeg_chunk.hpp"
#include "neuroloop/dsp/exec.hpp"
#include "neuroloop/dsp/filter.hpp"
#include "neuroloop/dsp/spectrum.hpp"
#include "neuroloop/iaf/iaf.hpp"

namespace neuroloop::adapt {

struct PipelineConfig {
  double sample_rate = 500.0;
  double window_s = 20.0;
  iaf::IndividualBands bands = iaf::IndividualBands::canonical();
  dsp::ChannelSet alpha_set = dsp::ChannelSet::alpha_posterior();
  dsp::ChannelSet theta_set = dsp::ChannelSet::theta_frontal();
  double prime_seconds = 2.0;
  bool filter = true;
  // Only the alpha/theta channels are filtered and analysed. Turn off to carry
  // every incoming channel through the pipeline.
  bool restrict_to_sets = true;
  dsp::WelchOptions welch{};
  EngineConfig engine{};
  dsp::Exec exec = dsp::Exec::Parallel;

  void validate() const;
};

struct WindowPowers {
  double alpha = 0.0;
  double theta = 0.0;
};

// Welch PSD of an already filtered window, then mean band power on each set.
WindowPowers window_band_powers(const dsp::EegChunk& window, const PipelineConfig& config);

// Streaming filter -> 20 s tumbling windows -> band powers -> engine.
// Window boundaries follow the sample count from the first chunk; a chunk that
// starts before the end of the previous one is a sequencing error.
class OnlinePipeline {
 public:
  explicit OnlinePipeline(PipelineConfig config);

  // Decisions completed by this chunk, usually zero or one.
  std::vector<AdaptationDecision> ingest(const dsp::EegChunk& chunk);

  const AdaptationEngine& engine() const { return engine_; }
  const PipelineConfig& config() const { return config_; }
  const std::vector<BandPowerWindow>& windows() const { return engine_.windows(); }
  double buffered_seconds() const;
  std::size_t window_samples() const { return window_n_; }

 private:
  void complete_window();

  PipelineConfig config_;
  AdaptationEngine engine_;
  dsp::StreamingFilter filter_;
  std::vector<std::string> labels_;  // channels carried through, fixed by the first chunk
  std::size_t input_channels_ = 0;
  std::vector<std::vector<double>> buffer_;
  std::size_t window_n_ = 0;
  std::size_t windows_done_ = 0;
  std::optional<double> t0_;
  double next_time_ = 0.0;
};

}  // namespace neuroloop::adapt
