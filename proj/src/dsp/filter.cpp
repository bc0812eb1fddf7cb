#include "neuroloop/dsp/filter.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "neuroloop/errors.hpp"

namespace neuroloop::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

void check_cutoff(double f_hz, double sample_rate, const char* what) {
  if (!(sample_rate > 0.0)) throw InvalidParameter("sample_rate must be > 0");
  if (!(f_hz > 0.0) || !(f_hz < sample_rate / 2.0)) {
    throw InvalidParameter(std::string(what) + " must lie strictly inside (0, Nyquist)");
  }
}

void check_order(int order, const char* what) {
  if (order < 2 || order > 16 || order % 2 != 0) {
    throw InvalidParameter(std::string(what) + " must be an even number in [2, 16]");
  }
}

// Bilinear-transform second-order sections (prewarped at f0).
Biquad lowpass_section(double f0, double q, double fs) {
  const double w0 = 2.0 * kPi * f0 / fs;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0, -2.0 * cw / a0,
          (1.0 - alpha) / a0};
}

Biquad highpass_section(double f0, double q, double fs) {
  const double w0 = 2.0 * kPi * f0 / fs;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0, -2.0 * cw / a0,
          (1.0 - alpha) / a0};
}

// Q of each conjugate pole pair of an even-order Butterworth prototype.
std::vector<double> butterworth_qs(int order) {
  std::vector<double> qs;
  for (int k = 0; k < order / 2; ++k) {
    const double phi = kPi * (2.0 * k + 1.0) / (2.0 * order);
    qs.push_back(1.0 / (2.0 * std::cos(phi)));
  }
  return qs;
}

}  // namespace

bool Biquad::stable() const {
  // Poles of z^2 + a1 z + a2 inside the unit circle (Jury criterion).
  return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

double FilterSpec::magnitude(double f_hz) const {
  const std::complex<double> z = std::polar(1.0, -2.0 * kPi * f_hz / sample_rate);
  std::complex<double> h = 1.0;
  for (const auto& s : sections) {
    h *= (s.b0 + s.b1 * z + s.b2 * z * z) / (1.0 + s.a1 * z + s.a2 * z * z);
  }
  return std::abs(h);
}

FilterSpec design_notch(double center_hz, double quality, double sample_rate) {
  check_cutoff(center_hz, sample_rate, "notch center");
  if (!(quality > 0.0)) throw InvalidParameter("notch quality must be > 0");
  const double w0 = 2.0 * kPi * center_hz / sample_rate;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * quality);
  const double a0 = 1.0 + alpha;
  FilterSpec spec;
  spec.kind = FilterKind::Notch;
  spec.low_hz = center_hz;
  spec.high_hz = center_hz;
  spec.quality_or_order = quality;
  spec.sample_rate = sample_rate;
  spec.sections.push_back({1.0 / a0, -2.0 * cw / a0, 1.0 / a0, -2.0 * cw / a0, (1.0 - alpha) / a0});
  return spec;
}

FilterSpec design_bandpass(double low_hz, double high_hz, double sample_rate, int highpass_order,
                           int lowpass_order) {
  check_cutoff(low_hz, sample_rate, "band-pass lower cutoff");
  check_cutoff(high_hz, sample_rate, "band-pass upper cutoff");
  if (!(low_hz < high_hz)) throw InvalidParameter("band-pass lower cutoff must be below upper");
  check_order(highpass_order, "high-pass order");
  check_order(lowpass_order, "low-pass order");
  FilterSpec spec;
  spec.kind = FilterKind::BandPass;
  spec.low_hz = low_hz;
  spec.high_hz = high_hz;
  spec.quality_or_order = highpass_order + lowpass_order;
  spec.sample_rate = sample_rate;
  for (double q : butterworth_qs(highpass_order)) {
    spec.sections.push_back(highpass_section(low_hz, q, sample_rate));
  }
  for (double q : butterworth_qs(lowpass_order)) {
    spec.sections.push_back(lowpass_section(high_hz, q, sample_rate));
  }
  for (const auto& s : spec.sections) {
    if (!s.stable()) throw NumericalError("band-pass design produced an unstable section");
  }
  return spec;
}

FilterSpec design_filter(FilterKind kind, const FilterParams& params, double sample_rate) {
  switch (kind) {
    case FilterKind::Notch:
      return design_notch(params.low_hz, params.quality, sample_rate);
    case FilterKind::BandPass:
      return design_bandpass(params.low_hz, params.high_hz, sample_rate, params.highpass_order,
                             params.lowpass_order);
  }
  throw InvalidParameter("unknown filter kind");
}

std::vector<FilterSpec> default_online_chain(double sample_rate) {
  return {design_notch(50.0, 30.0, sample_rate), design_bandpass(1.0, 70.0, sample_rate)};
}

StreamingFilter::StreamingFilter(std::vector<FilterSpec> chain, double prime_seconds)
    : prime_seconds_(prime_seconds) {
  if (chain.empty()) throw InvalidParameter("StreamingFilter: empty filter chain");
  if (prime_seconds < 0.0) throw InvalidParameter("StreamingFilter: prime_seconds must be >= 0");
  sample_rate_ = chain.front().sample_rate;
  for (const auto& spec : chain) {
    if (spec.sample_rate != sample_rate_) {
      throw ConfigurationError("StreamingFilter: filters in a chain must share a sample rate");
    }
    sections_.insert(sections_.end(), spec.sections.begin(), spec.sections.end());
  }
}

StreamingFilter::StreamingFilter(FilterSpec spec, double prime_seconds)
    : StreamingFilter(std::vector<FilterSpec>{std::move(spec)}, prime_seconds) {}

void StreamingFilter::reset() {
  state_.clear();
  n_channels_ = 0;
}

void StreamingFilter::run_channel(std::size_t c, std::span<const double> in,
                                  std::span<double> out) {
  auto* st = state_.data() + c * sections_.size();
  const std::size_t ns = sections_.size();
  for (std::size_t i = 0; i < in.size(); ++i) {
    double v = in[i];
    for (std::size_t k = 0; k < ns; ++k) {
      // Transposed direct form II.
      const Biquad& s = sections_[k];
      auto& z = st[k];
      const double y = s.b0 * v + z[0];
      z[0] = s.b1 * v - s.a1 * y + z[1];
      z[1] = s.b2 * v - s.a2 * y;
      v = y;
    }
    out[i] = v;
  }
}

void StreamingFilter::init_state(const EegChunk& first, Exec exec) {
  n_channels_ = first.n_channels();
  state_.assign(n_channels_ * sections_.size(), {0.0, 0.0});
  const auto n = first.n_samples();
  const auto want = static_cast<std::size_t>(std::llround(prime_seconds_ * sample_rate_));
  const std::size_t pad = std::min(want, n > 0 ? n - 1 : 0);
  if (pad == 0) return;
  const auto nc = static_cast<std::ptrdiff_t>(n_channels_);
#pragma omp parallel for if (exec == Exec::Parallel) schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    auto x = first.channel(static_cast<std::size_t>(c));
    // Odd reflection about the first sample: 2*x0 - x[pad], ..., 2*x0 - x[1].
    std::vector<double> reflected(pad);
    for (std::size_t i = 0; i < pad; ++i) reflected[i] = 2.0 * x[0] - x[pad - i];
    std::vector<double> discard(pad);
    run_channel(static_cast<std::size_t>(c), reflected, discard);
  }
}

EegChunk StreamingFilter::process(const EegChunk& chunk, Exec exec) {
  if (chunk.sample_rate() != sample_rate_) {
    throw ConfigurationError("filter sample rate does not match chunk sample rate");
  }
  if (state_.empty()) {
    init_state(chunk, exec);
  } else if (chunk.n_channels() != n_channels_) {
    throw ConfigurationError("channel count changed within a filtered stream");
  }
  EegChunk out(chunk.start_time(), chunk.sample_rate(), chunk.channel_labels(), chunk.n_samples());
  const auto nc = static_cast<std::ptrdiff_t>(n_channels_);
#pragma omp parallel for if (exec == Exec::Parallel) schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    run_channel(ci, chunk.channel(ci), out.channel(ci));
  }
  return out;
}

EegChunk apply_filter(const EegChunk& chunk, const FilterSpec& spec, Exec exec) {
  StreamingFilter f(spec);
  return f.process(chunk, exec);
}

}  // namespace neuroloop::dsp
