#include "neuroloop/dsp/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "neuroloop/dsp/fft.hpp"
#include "neuroloop/errors.hpp"

namespace neuroloop::dsp {

std::size_t PsdEstimate::index_of(const std::string& label) const {
  auto it = std::find(channel_labels.begin(), channel_labels.end(), label);
  return it == channel_labels.end() ? EegChunk::npos
                                    : static_cast<std::size_t>(it - channel_labels.begin());
}

std::vector<double> make_taper(Taper taper, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n <= 1 || taper == Taper::Rectangular) return w;
  // Periodic (DFT-even) form.
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(step * static_cast<double>(i));
    w[i] = taper == Taper::Hamming ? 0.54 - 0.46 * c : 0.5 - 0.5 * c;
  }
  return w;
}

PsdEstimate welch_psd(const EegChunk& window, const WelchOptions& opts, Exec exec) {
  const double fs = window.sample_rate();
  if (!(opts.segment_seconds > 0.0)) throw InvalidParameter("welch: segment length must be > 0");
  if (!(opts.overlap >= 0.0 && opts.overlap < 1.0)) {
    throw InvalidParameter("welch: overlap must be in [0, 1)");
  }
  const auto nperseg = static_cast<std::size_t>(std::llround(opts.segment_seconds * fs));
  const auto nfft = static_cast<std::size_t>(std::llround(opts.zero_pad_seconds * fs));
  if (nperseg < 2) throw InvalidParameter("welch: segment shorter than two samples");
  if (nfft < nperseg) throw InvalidParameter("welch: zero-pad length shorter than segment");
  if (window.n_samples() < nperseg) {
    throw InsufficientData("welch: window shorter than one segment");
  }
  const auto noverlap = static_cast<std::size_t>(std::floor(static_cast<double>(nperseg) * opts.overlap));
  const std::size_t hop = nperseg - noverlap;
  const std::size_t nseg = (window.n_samples() - nperseg) / hop + 1;
  const std::size_t nbins = nfft / 2 + 1;

  const auto taper = make_taper(opts.taper, nperseg);
  double wsq = 0.0;
  for (double v : taper) wsq += v * v;
  const double scale = 1.0 / (fs * wsq * static_cast<double>(nseg));

  PsdEstimate out;
  out.channel_labels = window.channel_labels();
  out.resolution = fs / static_cast<double>(nfft);
  out.window_length = static_cast<double>(nperseg) / fs;
  out.n_segments = nseg;
  out.freqs.resize(nbins);
  for (std::size_t k = 0; k < nbins; ++k) out.freqs[k] = static_cast<double>(k) * out.resolution;
  out.power.assign(window.n_channels() * nbins, 0.0);

  const RealFft fft(nfft);
  const auto nc = static_cast<std::ptrdiff_t>(window.n_channels());
#pragma omp parallel if (exec == Exec::Parallel)
  {
    FftBuffer<double> buf(nfft);
    FftBuffer<std::complex<double>> spec(nbins);
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
      const auto x = window.channel(static_cast<std::size_t>(c));
      double* acc = out.power.data() + static_cast<std::size_t>(c) * nbins;
      for (std::size_t s = 0; s < nseg; ++s) {
        const auto seg = x.subspan(s * hop, nperseg);
        double mean = 0.0;
        if (opts.remove_segment_mean) {
          for (double v : seg) mean += v;
          mean /= static_cast<double>(nperseg);
        }
        double* b = buf.data();
        for (std::size_t i = 0; i < nperseg; ++i) b[i] = (seg[i] - mean) * taper[i];
        std::fill(b + nperseg, b + nfft, 0.0);
        fft.forward(buf.span(), spec.span());
        const auto* X = spec.data();
        for (std::size_t k = 0; k < nbins; ++k) acc[k] += std::norm(X[k]);
      }
      for (std::size_t k = 0; k < nbins; ++k) {
        const bool edge = k == 0 || (nfft % 2 == 0 && k == nbins - 1);
        acc[k] *= edge ? scale : 2.0 * scale;
      }
    }
  }
  return out;
}

std::vector<double> mean_spectrum(const PsdEstimate& psd, const std::vector<std::string>& labels) {
  if (labels.empty()) throw ConfigurationError("mean_spectrum: empty channel set");
  std::vector<double> mean(psd.n_bins(), 0.0);
  std::string missing;
  for (const auto& l : labels) {
    const auto c = psd.index_of(l);
    if (c == EegChunk::npos) {
      missing += " " + l;
      continue;
    }
    const auto row = psd.channel(c);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += row[k];
  }
  if (!missing.empty()) throw ConfigurationError("channels not present:" + missing);
  for (double& v : mean) v /= static_cast<double>(labels.size());
  return mean;
}

BandRange::BandRange(double lo, double hi, BandName n) : low(lo), high(hi), name(n) {
  if (!(lo > 0.0) || !(lo < hi)) throw InvalidParameter("BandRange: need 0 < low < high");
}

const char* to_string(BandName name) {
  switch (name) {
    case BandName::Delta: return "delta";
    case BandName::Theta: return "theta";
    case BandName::Alpha: return "alpha";
    case BandName::Beta: return "beta";
    case BandName::Gamma: return "gamma";
  }
  return "?";
}

ChannelSet ChannelSet::alpha_posterior() {
  return {ChannelRole::AlphaPosterior, {"P3", "Pz", "PO3", "POz", "PO4", "O1", "O2"}};
}

ChannelSet ChannelSet::theta_frontal() {
  return {ChannelRole::ThetaFrontal,
          {"Fp1", "Fp2", "AF3", "AF4", "F1", "F2", "F3", "Fz", "F4", "FC1", "FC2"}};
}

ChannelSet ChannelSet::frontal_posterior_union() {
  ChannelSet u{ChannelRole::Combined, theta_frontal().labels};
  for (const auto& l : alpha_posterior().labels) u.labels.push_back(l);
  return u;
}

double integrate_band(std::span<const double> freqs, std::span<const double> power, double low,
                      double high) {
  if (freqs.size() < 2 || freqs.size() != power.size()) {
    throw InvalidParameter("integrate_band: malformed spectrum");
  }
  if (low < freqs.front() || high > freqs.back() || !(low < high)) {
    throw InvalidParameter("integrate_band: band outside the frequency grid");
  }
  const double df = freqs[1] - freqs[0];
  auto value_at = [&](double f) {
    const double pos = (f - freqs.front()) / df;
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= freqs.size() - 1) return power.back();
    const double t = pos - static_cast<double>(i);
    return power[i] + t * (power[i + 1] - power[i]);
  };
  // Grid points strictly inside (low, high).
  const auto first = static_cast<std::size_t>(std::floor((low - freqs.front()) / df)) + 1;
  double total = 0.0;
  double prev_f = low;
  double prev_p = value_at(low);
  for (std::size_t i = first; i < freqs.size() && freqs[i] < high; ++i) {
    if (freqs[i] <= low) continue;
    total += 0.5 * (freqs[i] - prev_f) * (power[i] + prev_p);
    prev_f = freqs[i];
    prev_p = power[i];
  }
  total += 0.5 * (high - prev_f) * (value_at(high) + prev_p);
  return total;
}

std::vector<double> band_power_per_channel(const PsdEstimate& psd, const BandRange& band,
                                           const ChannelSet& channels) {
  if (channels.labels.empty()) throw ConfigurationError("band_power: empty channel set");
  std::vector<std::size_t> idx;
  std::string missing;
  for (const auto& l : channels.labels) {
    const auto c = psd.index_of(l);
    if (c == EegChunk::npos) missing += " " + l;
    idx.push_back(c);
  }
  if (!missing.empty()) throw ConfigurationError("band_power: channels not present:" + missing);
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto c : idx) out.push_back(integrate_band(psd.freqs, psd.channel(c), band.low, band.high));
  return out;
}

double band_power(const PsdEstimate& psd, const BandRange& band, const ChannelSet& channels) {
  const auto per = band_power_per_channel(psd, band, channels);
  double sum = 0.0;
  for (double p : per) sum += p;
  return sum / static_cast<double>(per.size());
}

EegChunk common_average_reference(const EegChunk& chunk, Exec exec) {
  if (chunk.n_channels() < 2) {
    throw InvalidOperation("common average reference needs at least two channels");
  }
  EegChunk out = chunk;
  const auto nc = chunk.n_channels();
  const auto ns = static_cast<std::ptrdiff_t>(chunk.n_samples());
  const double* in = chunk.samples().data();
  double* o = out.samples().data();
  const auto stride = chunk.n_samples();
#pragma omp parallel for if (exec == Exec::Parallel) schedule(static)
  for (std::ptrdiff_t i = 0; i < ns; ++i) {
    double mean = 0.0;
    for (std::size_t c = 0; c < nc; ++c) mean += in[c * stride + static_cast<std::size_t>(i)];
    mean /= static_cast<double>(nc);
    for (std::size_t c = 0; c < nc; ++c) o[c * stride + static_cast<std::size_t>(i)] -= mean;
  }
  return out;
}

}  // namespace neuroloop::dsp
