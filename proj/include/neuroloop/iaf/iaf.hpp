#pragma once

#include <span>
#include <vector>

#include "neuroloop/dsp/eeg_chunk.hpp"
#include "neuroloop/dsp/spectrum.hpp"

namespace neuroloop::iaf {

// Savitzky-Golay filter over a uniformly spaced sequence. `deriv` 0 smooths,
// 1 returns the first derivative per sample step. Edges are handled by
// evaluating the polynomial fitted to the first/last full window.
std::vector<double> savitzky_golay(std::span<const double> y, int window, int order, int deriv = 0);

enum class IafQuality { PeakFound, Fallback };

const char* to_string(IafQuality q);

struct IafEstimate {
  double paf = 0.0;
  double cog = 0.0;
  double f_low = 0.0;
  double f_high = 0.0;
  IafQuality quality = IafQuality::Fallback;
};

struct IndividualBands {
  dsp::BandRange theta;
  dsp::BandRange alpha;

  // (4, 8) theta and (8, 13) alpha.
  static IndividualBands canonical();
};

struct IafConfig {
  double search_low = 7.0;
  double search_high = 13.0;
  int sg_window = 31;  // bins; 3.1 Hz at 0.1 Hz resolution
  int sg_order = 5;
  // Required peak height over the higher of its two flanking minima inside the
  // search window, as a fraction of that minimum.
  double prominence = 0.5;
  double bound_floor = 0.05;      // fraction of the peak-to-trough range
  double bound_limit_low = 7.0;   // outermost frequencies a bound may take
  double bound_limit_high = 15.0;
  double fallback_low = 8.0;
  double fallback_high = 13.0;
  double min_duration = 60.0;     // seconds
  dsp::WelchOptions welch{};
};

// Drops `trim_seconds` from both ends.
dsp::EegChunk trim_edges(const dsp::EegChunk& recording, double trim_seconds = 4.0);

// Peak search over an already channel-averaged spectrum.
IafEstimate estimate_iaf_from_spectrum(std::span<const double> freqs, std::span<const double> power,
                                       const IafConfig& config = {});

// Recording is expected to be filtered and trimmed already.
IafEstimate estimate_iaf(const dsp::EegChunk& recording, const dsp::ChannelSet& posterior,
                         const IafConfig& config = {});

// Online filter chain, then edge trimming, then estimate_iaf.
IafEstimate estimate_iaf_raw(const dsp::EegChunk& raw, const dsp::ChannelSet& posterior,
                             const IafConfig& config = {}, double trim_seconds = 4.0);

// alpha = [f_low, f_high], theta = [f_low - 4, f_low].
IndividualBands derive_bands(const IafEstimate& iaf);

}  // namespace neuroloop::iaf
