#include "neuroloop/adapt/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "neuroloop/errors.hpp"

namespace neuroloop::adapt {

void PipelineConfig::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigurationError("sample_rate must be > 0");
  if (!(window_s > 0.0)) throw ConfigurationError("window_s must be > 0");
  if (window_s < welch.segment_seconds) {
    throw ConfigurationError("window_s must cover at least one Welch segment");
  }
  if (alpha_set.labels.empty() || theta_set.labels.empty()) {
    throw ConfigurationError("alpha and theta channel sets must not be empty");
  }
  if (!(prime_seconds >= 0.0)) throw ConfigurationError("prime_seconds must be >= 0");
}

WindowPowers window_band_powers(const dsp::EegChunk& window, const PipelineConfig& config) {
  const auto psd = dsp::welch_psd(window, config.welch, config.exec);
  return {dsp::band_power(psd, config.bands.alpha, config.alpha_set),
          dsp::band_power(psd, config.bands.theta, config.theta_set)};
}

namespace {
std::vector<std::string> union_labels(const PipelineConfig& c) {
  std::vector<std::string> out = c.alpha_set.labels;
  for (const auto& l : c.theta_set.labels) {
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}
}  // namespace

OnlinePipeline::OnlinePipeline(PipelineConfig config)
    : config_(std::move(config)),
      engine_(config_.engine),
      filter_(dsp::default_online_chain(config_.sample_rate), config_.prime_seconds) {
  config_.validate();
  window_n_ = static_cast<std::size_t>(std::llround(config_.window_s * config_.sample_rate));
}

double OnlinePipeline::buffered_seconds() const {
  return buffer_.empty() ? 0.0 : static_cast<double>(buffer_[0].size()) / config_.sample_rate;
}

std::vector<AdaptationDecision> OnlinePipeline::ingest(const dsp::EegChunk& chunk) {
  if (chunk.sample_rate() != config_.sample_rate) {
    throw ConfigurationError("chunk sample rate does not match the session");
  }
  const double half = 0.5 / config_.sample_rate;
  if (!t0_) {
    t0_ = chunk.start_time();
    input_channels_ = chunk.n_channels();
    labels_ = config_.restrict_to_sets ? union_labels(config_) : chunk.channel_labels();
    buffer_.assign(labels_.size(), {});
  } else {
    if (chunk.n_channels() != input_channels_) {
      throw ConfigurationError("chunk channel count changed within the session");
    }
    if (chunk.start_time() < next_time_ - half) {
      throw SequencingError("chunk starts before the end of the previous chunk");
    }
  }
  next_time_ = chunk.end_time();

  // select() reports missing labels; also keeps the channel order stable.
  const auto used = chunk.channel_labels() == labels_ ? chunk : chunk.select(labels_);
  const auto filtered = config_.filter ? filter_.process(used, config_.exec) : used;
  for (std::size_t c = 0; c < labels_.size(); ++c) {
    const auto x = filtered.channel(c);
    buffer_[c].insert(buffer_[c].end(), x.begin(), x.end());
  }

  const auto before = engine_.log().size();
  while (buffer_[0].size() >= window_n_) complete_window();
  return {engine_.log().begin() + static_cast<std::ptrdiff_t>(before), engine_.log().end()};
}

void OnlinePipeline::complete_window() {
  const double start = *t0_ + static_cast<double>(windows_done_ * window_n_) / config_.sample_rate;
  std::vector<double> samples;
  samples.reserve(labels_.size() * window_n_);
  for (auto& row : buffer_) {
    samples.insert(samples.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(window_n_));
    row.erase(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(window_n_));
  }
  const dsp::EegChunk window(start, config_.sample_rate, labels_, std::move(samples));
  const auto p = window_band_powers(window, config_);
  BandPowerWindow w;
  w.index = windows_done_;
  w.start_time = start;
  w.duration = static_cast<double>(window_n_) / config_.sample_rate;
  w.alpha_power = p.alpha;
  w.theta_power = p.theta;
  ++windows_done_;
  engine_.step(w);
}

}  // namespace neuroloop::adapt
