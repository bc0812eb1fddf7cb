#include "neuroloop/dsp/reference.hpp"

#include <cmath>
#include <numbers>

#include "neuroloop/errors.hpp"

namespace neuroloop::dsp::reference {

std::vector<double> filter_direct(std::span<const double> x, const std::vector<Biquad>& sections) {
  std::vector<double> cur(x.begin(), x.end());
  for (const auto& s : sections) {
    std::vector<double> y(cur.size(), 0.0);
    for (std::size_t n = 0; n < cur.size(); ++n) {
      const double x1 = n >= 1 ? cur[n - 1] : 0.0;
      const double x2 = n >= 2 ? cur[n - 2] : 0.0;
      const double y1 = n >= 1 ? y[n - 1] : 0.0;
      const double y2 = n >= 2 ? y[n - 2] : 0.0;
      y[n] = s.b0 * cur[n] + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
    }
    cur = std::move(y);
  }
  return cur;
}

PsdEstimate welch_psd_dft(const EegChunk& window, const WelchOptions& opts) {
  const double fs = window.sample_rate();
  const auto nperseg = static_cast<std::size_t>(std::llround(opts.segment_seconds * fs));
  const auto nfft = static_cast<std::size_t>(std::llround(opts.zero_pad_seconds * fs));
  if (window.n_samples() < nperseg) throw InsufficientData("welch: window shorter than segment");
  const auto noverlap = static_cast<std::size_t>(std::floor(static_cast<double>(nperseg) * opts.overlap));
  const std::size_t hop = nperseg - noverlap;
  const std::size_t nseg = (window.n_samples() - nperseg) / hop + 1;
  const std::size_t nbins = nfft / 2 + 1;

  // Taper written out independently of make_taper.
  std::vector<double> w(nperseg, 1.0);
  for (std::size_t i = 0; i < nperseg; ++i) {
    const double ph = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nperseg);
    if (opts.taper == Taper::Hamming) w[i] = 0.54 - 0.46 * std::cos(ph);
    if (opts.taper == Taper::Hann) w[i] = 0.5 * (1.0 - std::cos(ph));
  }
  double u = 0.0;
  for (double v : w) u += v * v;

  std::vector<double> cos_t(nfft), sin_t(nfft);
  for (std::size_t i = 0; i < nfft; ++i) {
    const double ph = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nfft);
    cos_t[i] = std::cos(ph);
    sin_t[i] = std::sin(ph);
  }

  PsdEstimate out;
  out.channel_labels = window.channel_labels();
  out.resolution = fs / static_cast<double>(nfft);
  out.window_length = static_cast<double>(nperseg) / fs;
  out.n_segments = nseg;
  for (std::size_t k = 0; k < nbins; ++k) out.freqs.push_back(static_cast<double>(k) * out.resolution);
  out.power.assign(window.n_channels() * nbins, 0.0);

  std::vector<double> seg(nperseg);
  for (std::size_t c = 0; c < window.n_channels(); ++c) {
    const auto x = window.channel(c);
    for (std::size_t s = 0; s < nseg; ++s) {
      double mean = 0.0;
      if (opts.remove_segment_mean) {
        for (std::size_t i = 0; i < nperseg; ++i) mean += x[s * hop + i];
        mean /= static_cast<double>(nperseg);
      }
      for (std::size_t i = 0; i < nperseg; ++i) seg[i] = (x[s * hop + i] - mean) * w[i];
      for (std::size_t k = 0; k < nbins; ++k) {
        double re = 0.0, im = 0.0;
        std::size_t idx = 0;
        for (std::size_t i = 0; i < nperseg; ++i) {
          re += seg[i] * cos_t[idx];
          im -= seg[i] * sin_t[idx];
          idx += k;
          if (idx >= nfft) idx -= nfft;
        }
        double p = (re * re + im * im) / (fs * u);
        if (k != 0 && !(nfft % 2 == 0 && k == nbins - 1)) p *= 2.0;
        out.power[c * nbins + k] += p / static_cast<double>(nseg);
      }
    }
  }
  return out;
}

}  // namespace neuroloop::dsp::reference
