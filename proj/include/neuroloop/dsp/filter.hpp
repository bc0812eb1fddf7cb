#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "neuroloop/dsp/eeg_chunk.hpp"
#include "neuroloop/dsp/exec.hpp"

namespace neuroloop::dsp {

// One second-order section, normalized so a0 == 1:
//   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  bool stable() const;
};

enum class FilterKind { Notch, BandPass };

struct FilterParams {
  // Notch: low_hz is the center frequency. Band-pass: [low_hz, high_hz].
  double low_hz = 50.0;
  double high_hz = 0.0;
  double quality = 30.0;      // notch only
  int highpass_order = 4;     // band-pass only, even
  int lowpass_order = 8;      // band-pass only, even
};

struct FilterSpec {
  FilterKind kind = FilterKind::Notch;
  double low_hz = 0.0;
  double high_hz = 0.0;
  double quality_or_order = 0.0;
  double sample_rate = 0.0;
  std::vector<Biquad> sections;

  // |H(e^{jw})| at frequency f (Hz).
  double magnitude(double f_hz) const;
};

FilterSpec design_filter(FilterKind kind, const FilterParams& params, double sample_rate);
FilterSpec design_notch(double center_hz, double quality, double sample_rate);
FilterSpec design_bandpass(double low_hz, double high_hz, double sample_rate,
                           int highpass_order = 4, int lowpass_order = 8);

// The online cascade: 50 Hz notch followed by the 1-70 Hz band-pass.
std::vector<FilterSpec> default_online_chain(double sample_rate);

// Cascade of filters with per-channel state carried across successive chunks.
// Owned by a single session; not safe to share between threads.
class StreamingFilter {
 public:
  StreamingFilter(std::vector<FilterSpec> chain, double prime_seconds = 0.0);
  explicit StreamingFilter(FilterSpec spec, double prime_seconds = 0.0);

  EegChunk process(const EegChunk& chunk, Exec exec = Exec::Parallel);
  void reset();
  bool primed() const { return !state_.empty(); }

 private:
  void init_state(const EegChunk& first, Exec exec);
  void run_channel(std::size_t c, std::span<const double> in, std::span<double> out);

  std::vector<Biquad> sections_;
  double sample_rate_ = 0.0;
  double prime_seconds_ = 0.0;
  std::size_t n_channels_ = 0;
  // [channel][section] -> {z1, z2}
  std::vector<std::array<double, 2>> state_;
};

// One-shot filtering with fresh (zero) state.
EegChunk apply_filter(const EegChunk& chunk, const FilterSpec& spec, Exec exec = Exec::Parallel);

}  // namespace neuroloop::dsp
