#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "neuroloop/dsp/eeg_chunk.hpp"
#include "neuroloop/dsp/exec.hpp"

namespace neuroloop::dsp {

enum class Taper { Hamming, Hann, Rectangular };

struct WelchOptions {
  double segment_seconds = 5.0;
  double overlap = 0.5;
  double zero_pad_seconds = 10.0;
  Taper taper = Taper::Hamming;
  bool remove_segment_mean = true;
};

// One-sided power spectral density, µV²/Hz, one row per channel.
struct PsdEstimate {
  std::vector<double> freqs;
  std::vector<std::string> channel_labels;
  std::vector<double> power;  // row-major [channel][bin]
  double resolution = 0.0;
  double window_length = 0.0;  // segment length, seconds
  std::size_t n_segments = 0;

  std::size_t n_bins() const { return freqs.size(); }
  std::span<const double> channel(std::size_t c) const {
    return {power.data() + c * freqs.size(), freqs.size()};
  }
  std::size_t index_of(const std::string& label) const;
};

std::vector<double> make_taper(Taper taper, std::size_t n);

// Welch averaged periodogram. Density normalization 1 / (fs * sum(w^2)), one-sided,
// so integrating the PSD of a sinusoid recovers its variance.
PsdEstimate welch_psd(const EegChunk& window, const WelchOptions& opts = {},
                      Exec exec = Exec::Parallel);

// Channel-averaged PSD over the given labels.
std::vector<double> mean_spectrum(const PsdEstimate& psd, const std::vector<std::string>& labels);

enum class BandName { Delta, Theta, Alpha, Beta, Gamma };

struct BandRange {
  double low = 0.0;
  double high = 0.0;
  BandName name = BandName::Alpha;

  BandRange() = default;
  BandRange(double lo, double hi, BandName n);
};

const char* to_string(BandName name);

enum class ChannelRole { AlphaPosterior, ThetaFrontal, Combined };

struct ChannelSet {
  ChannelRole role = ChannelRole::AlphaPosterior;
  std::vector<std::string> labels;

  static ChannelSet alpha_posterior();
  static ChannelSet theta_frontal();
  // Union of the frontal and posterior sets, frontal first.
  static ChannelSet frontal_posterior_union();
};

// Trapezoidal integral of one spectrum over [low, high]. Band edges falling between
// grid points are handled by linear interpolation, so adjacent bands add exactly.
double integrate_band(std::span<const double> freqs, std::span<const double> power, double low,
                      double high);

// Per-channel band integral, then arithmetic mean across the set.
double band_power(const PsdEstimate& psd, const BandRange& band, const ChannelSet& channels);
std::vector<double> band_power_per_channel(const PsdEstimate& psd, const BandRange& band,
                                           const ChannelSet& channels);

// Subtracts the across-channel mean at every sample instant.
EegChunk common_average_reference(const EegChunk& chunk, Exec exec = Exec::Parallel);

}  // namespace neuroloop::dsp
