#include "neuroloop/iaf/iaf.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "neuroloop/dsp/filter.hpp"
#include "neuroloop/errors.hpp"

namespace neuroloop::iaf {

std::vector<double> savitzky_golay(std::span<const double> y, int window, int order, int deriv) {
  if (window < 3 || window % 2 == 0) throw InvalidParameter("savitzky_golay: window must be odd and >= 3");
  if (order < deriv || order >= window) throw InvalidParameter("savitzky_golay: need deriv <= order < window");
  if (deriv < 0 || deriv > 1) throw InvalidParameter("savitzky_golay: deriv must be 0 or 1");
  if (y.size() < static_cast<std::size_t>(window)) {
    throw InsufficientData("savitzky_golay: sequence shorter than the window");
  }
  const int half = window / 2;
  Eigen::MatrixXd a(window, order + 1);
  for (int i = 0; i < window; ++i) {
    for (int j = 0; j <= order; ++j) a(i, j) = std::pow(static_cast<double>(i - half), j);
  }
  // Rows of the pseudo-inverse map a window of samples to polynomial coefficients.
  const Eigen::MatrixXd pinv = (a.transpose() * a).ldlt().solve(a.transpose());

  auto weights_at = [&](double t) {
    Eigen::RowVectorXd v(order + 1);
    for (int j = 0; j <= order; ++j) {
      if (deriv == 0) {
        v(j) = std::pow(t, j);
      } else {
        v(j) = j == 0 ? 0.0 : j * std::pow(t, j - 1);
      }
    }
    return Eigen::RowVectorXd(v * pinv);
  };

  const auto n = static_cast<int>(y.size());
  std::vector<double> out(y.size());
  const Eigen::RowVectorXd centre = weights_at(0.0);
  for (int i = 0; i < n; ++i) {
    int start = i - half;
    Eigen::RowVectorXd w;
    if (start < 0) {
      start = 0;
      w = weights_at(static_cast<double>(i - half));
    } else if (start + window > n) {
      start = n - window;
      w = weights_at(static_cast<double>(i - start - half));
    } else {
      w = centre;
    }
    double acc = 0.0;
    for (int k = 0; k < window; ++k) acc += w(k) * y[static_cast<std::size_t>(start + k)];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

const char* to_string(IafQuality q) {
  return q == IafQuality::PeakFound ? "peak-found" : "fallback";
}

IndividualBands IndividualBands::canonical() {
  return {dsp::BandRange(4.0, 8.0, dsp::BandName::Theta), dsp::BandRange(8.0, 13.0, dsp::BandName::Alpha)};
}

dsp::EegChunk trim_edges(const dsp::EegChunk& recording, double trim_seconds) {
  if (trim_seconds < 0.0) throw InvalidParameter("trim_edges: trim must be >= 0");
  if (trim_seconds == 0.0) return recording;
  if (!(recording.duration() > 2.0 * trim_seconds)) {
    throw InsufficientData("trim_edges: recording not longer than twice the trim");
  }
  const auto drop = static_cast<std::size_t>(std::llround(trim_seconds * recording.sample_rate()));
  if (2 * drop >= recording.n_samples()) throw InsufficientData("trim_edges: nothing left after trimming");
  return recording.slice(drop, recording.n_samples() - 2 * drop);
}

namespace {

double cog_over(std::span<const double> freqs, std::span<const double> power, double lo, double hi) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (freqs[k] < lo || freqs[k] > hi) continue;
    num += freqs[k] * power[k];
    den += power[k];
  }
  return den > 0.0 ? num / den : 0.5 * (lo + hi);
}

IafEstimate fallback(std::span<const double> freqs, std::span<const double> power, const IafConfig& c) {
  IafEstimate e;
  e.quality = IafQuality::Fallback;
  e.f_low = c.fallback_low;
  e.f_high = c.fallback_high;
  e.paf = 0.5 * (c.fallback_low + c.fallback_high);
  e.cog = cog_over(freqs, power, c.fallback_low, c.fallback_high);
  return e;
}

// Walks from the peak towards `limit` (step +1 or -1) until the smoothed slope
// turns back up or the limit is reached, then returns the interpolated frequency
// where power first drops to trough + floor * (peak - trough).
double find_bound(std::span<const double> freqs, const std::vector<double>& smooth,
                  const std::vector<double>& slope, std::ptrdiff_t peak, std::ptrdiff_t limit,
                  std::ptrdiff_t step, double floor_fraction) {
  auto at = [](const std::vector<double>& v, std::ptrdiff_t i) { return v[static_cast<std::size_t>(i)]; };
  std::ptrdiff_t trough = limit;
  for (std::ptrdiff_t i = peak + step; i != limit + step; i += step) {
    // Slope measured moving away from the peak; >= 0 means rising again.
    const double outward = step > 0 ? at(slope, i) : -at(slope, i);
    if (outward >= 0.0) {
      trough = i;
      break;
    }
  }
  std::ptrdiff_t lowest = peak;
  for (std::ptrdiff_t i = peak; i != trough + step; i += step) {
    if (at(smooth, i) < at(smooth, lowest)) lowest = i;
  }
  const double level = at(smooth, lowest) + floor_fraction * (at(smooth, peak) - at(smooth, lowest));
  for (std::ptrdiff_t i = peak + step; i != lowest + step; i += step) {
    if (at(smooth, i) <= level) {
      const std::ptrdiff_t prev = i - step;
      const double t = (at(smooth, prev) - level) / (at(smooth, prev) - at(smooth, i));
      const double fp = freqs[static_cast<std::size_t>(prev)];
      return fp + t * (freqs[static_cast<std::size_t>(i)] - fp);
    }
  }
  return freqs[static_cast<std::size_t>(lowest)];
}

}  // namespace

IafEstimate estimate_iaf_from_spectrum(std::span<const double> freqs, std::span<const double> power,
                                       const IafConfig& c) {
  if (freqs.size() != power.size() || freqs.size() < static_cast<std::size_t>(c.sg_window)) {
    throw InvalidParameter("estimate_iaf: malformed spectrum");
  }
  if (!(c.search_low < c.search_high) || c.bound_limit_low > c.search_low ||
      c.bound_limit_high < c.search_high) {
    throw InvalidParameter("estimate_iaf: inconsistent search limits");
  }
  if (c.bound_limit_high > freqs.back()) throw InvalidParameter("estimate_iaf: spectrum too narrow");
  const auto smooth = savitzky_golay(power, c.sg_window, c.sg_order, 0);
  const auto slope = savitzky_golay(power, c.sg_window, c.sg_order, 1);

  auto first_at_or_above = [&](double f) {
    return static_cast<std::size_t>(std::lower_bound(freqs.begin(), freqs.end(), f - 1e-9) - freqs.begin());
  };
  auto last_at_or_below = [&](double f) {
    return static_cast<std::size_t>(std::upper_bound(freqs.begin(), freqs.end(), f + 1e-9) - freqs.begin()) - 1;
  };
  const std::size_t lo = std::max<std::size_t>(first_at_or_above(c.search_low), 1);
  const std::size_t hi = std::min(last_at_or_below(c.search_high), freqs.size() - 2);

  std::size_t peak = freqs.size();
  for (std::size_t i = lo; i <= hi; ++i) {
    const bool local_max = smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1];
    if (local_max && (peak == freqs.size() || smooth[i] > smooth[peak])) peak = i;
  }
  if (peak == freqs.size()) return fallback(freqs, power, c);
  // Prominence against the higher of the two flanking minima in the search window.
  const double left_min = *std::min_element(smooth.begin() + lo, smooth.begin() + peak + 1);
  const double right_min = *std::min_element(smooth.begin() + peak, smooth.begin() + hi + 1);
  double base = std::max(left_min, right_min);
  if (!(base > 0.0)) {
    // smoothing rings below zero next to a very narrow peak; use the raw minima
    base = std::max(*std::min_element(power.begin() + lo, power.begin() + peak + 1),
                    *std::min_element(power.begin() + peak, power.begin() + hi + 1));
  }
  if (!(base > 0.0) || smooth[peak] < (1.0 + c.prominence) * base) {
    return fallback(freqs, power, c);
  }

  const std::size_t limit_lo = first_at_or_above(c.bound_limit_low);
  const std::size_t limit_hi = last_at_or_below(c.bound_limit_high);
  IafEstimate e;
  e.quality = IafQuality::PeakFound;
  e.paf = freqs[peak];
  const auto p = static_cast<std::ptrdiff_t>(peak);
  e.f_low = peak > limit_lo
                ? find_bound(freqs, smooth, slope, p, static_cast<std::ptrdiff_t>(limit_lo), -1, c.bound_floor)
                : freqs[limit_lo];
  e.f_high = peak < limit_hi
                 ? find_bound(freqs, smooth, slope, p, static_cast<std::ptrdiff_t>(limit_hi), +1, c.bound_floor)
                 : freqs[limit_hi];
  if (!(e.f_low < e.paf && e.paf < e.f_high)) return fallback(freqs, power, c);
  e.cog = cog_over(freqs, power, e.f_low, e.f_high);
  return e;
}

IafEstimate estimate_iaf(const dsp::EegChunk& recording, const dsp::ChannelSet& posterior,
                         const IafConfig& config) {
  if (posterior.labels.empty()) throw ConfigurationError("estimate_iaf: empty posterior channel set");
  if (recording.duration() < config.min_duration) {
    throw InsufficientData("estimate_iaf: recording shorter than the minimum duration");
  }
  const auto subset = recording.select(posterior.labels);
  const auto psd = dsp::welch_psd(subset, config.welch);
  const auto spectrum = dsp::mean_spectrum(psd, posterior.labels);
  return estimate_iaf_from_spectrum(psd.freqs, spectrum, config);
}

IafEstimate estimate_iaf_raw(const dsp::EegChunk& raw, const dsp::ChannelSet& posterior,
                             const IafConfig& config, double trim_seconds) {
  if (posterior.labels.empty()) throw ConfigurationError("estimate_iaf: empty posterior channel set");
  const auto subset = raw.select(posterior.labels);
  dsp::StreamingFilter filter(dsp::default_online_chain(raw.sample_rate()), 2.0);
  return estimate_iaf(trim_edges(filter.process(subset), trim_seconds), posterior, config);
}

IndividualBands derive_bands(const IafEstimate& iaf) {
  if (!(iaf.f_low > 4.0)) {
    throw DegenerateBand("derive_bands: alpha lower bound must exceed 4 Hz");
  }
  if (!(iaf.f_low < iaf.f_high)) throw DegenerateBand("derive_bands: empty alpha band");
  return {dsp::BandRange(iaf.f_low - 4.0, iaf.f_low, dsp::BandName::Theta),
          dsp::BandRange(iaf.f_low, iaf.f_high, dsp::BandName::Alpha)};
}

}  // namespace neuroloop::iaf
