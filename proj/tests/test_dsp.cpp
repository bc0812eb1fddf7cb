#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "neuroloop/dsp/filter.hpp"
#include "neuroloop/dsp/montage.hpp"
#include "neuroloop/dsp/reference.hpp"
#include "neuroloop/dsp/spectrum.hpp"
#include "neuroloop/errors.hpp"
#include "oracles.hpp"

using namespace neuroloop;
using namespace neuroloop::dsp;

namespace {

constexpr double kFs = 500.0;

EegChunk single(std::vector<double> x, double fs = kFs, double t0 = 0.0) {
  return EegChunk(t0, fs, {"Cz"}, std::move(x));
}

EegChunk posterior_chunk(const std::vector<double>& x) {
  const auto labels = ChannelSet::alpha_posterior().labels;
  std::vector<double> data;
  for (std::size_t c = 0; c < labels.size(); ++c) data.insert(data.end(), x.begin(), x.end());
  return EegChunk(0.0, kFs, labels, std::move(data));
}

double steady_gain(const FilterSpec& spec, double f) {
  const std::size_t n = static_cast<std::size_t>(20 * kFs);
  auto y = apply_filter(single(oracle::sine(n, f, kFs)), spec, Exec::Serial);
  auto tail = y.channel(0).subspan(n / 2);
  return oracle::fit_sinusoid_amplitude(tail, f, kFs);
}

}  // namespace

TEST_CASE("EegChunk invariants") {
  CHECK_THROWS_AS(EegChunk(0.0, 0.0, {"Cz"}, 10), InvalidParameter);
  CHECK_THROWS_AS(EegChunk(0.0, kFs, {"Cz"}, 0), InvalidParameter);
  CHECK_THROWS_AS(EegChunk(0.0, kFs, {"Cz", "Cz"}, 4), InvalidParameter);
  CHECK_THROWS_AS(EegChunk(0.0, kFs, {"Cz", "Pz"}, std::vector<double>(5)), InvalidParameter);
  EegChunk c(1.0, kFs, {"A", "B"}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(c.n_samples() == 3);
  CHECK(c.channel(1)[0] == 4);
  auto s = c.slice(1, 2);
  CHECK(s.start_time() == doctest::Approx(1.0 + 1.0 / kFs));
  CHECK(s.channel(1)[1] == 6);
  CHECK_THROWS_AS(c.select({"A", "Q", "R"}), ConfigurationError);
}

TEST_CASE("standard64 montage covers both channel sets") {
  const auto& m = standard64_labels();
  CHECK(m.size() == 64);
  for (const auto& set : {ChannelSet::alpha_posterior(), ChannelSet::theta_frontal()}) {
    for (const auto& l : set.labels) CHECK(std::find(m.begin(), m.end(), l) != m.end());
  }
  CHECK_THROWS_AS(montage_labels("nope"), ConfigurationError);
}

TEST_CASE("notch design") {
  const auto notch = design_notch(50.0, 30.0, kFs);
  REQUIRE(notch.sections.size() == 1);
  CHECK(notch.sections[0].stable());

  SUBCASE("DC passes") {
    auto y = apply_filter(single(std::vector<double>(5000, 1.0)), notch);
    CHECK(y.channel(0).back() == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("50 Hz attenuated by at least 30 dB") {
    CHECK(oracle::db(steady_gain(notch, 50.0)) <= -30.0);
  }
  SUBCASE("cutoff at or beyond Nyquist is rejected") {
    CHECK_THROWS_AS(design_notch(250.0, 30.0, kFs), InvalidParameter);
    CHECK_THROWS_AS(design_notch(0.0, 30.0, kFs), InvalidParameter);
  }
}

TEST_CASE("band-pass design") {
  const auto bp = design_bandpass(1.0, 70.0, kFs);
  for (const auto& s : bp.sections) CHECK(s.stable());
  CHECK(oracle::db(steady_gain(bp, 100.0)) <= -20.0);
  CHECK(std::abs(oracle::db(steady_gain(bp, 10.0))) <= 1.0);
  // Analytic response agrees with the time-domain measurement.
  CHECK(bp.magnitude(10.0) == doctest::Approx(steady_gain(bp, 10.0)).epsilon(1e-3));

  CHECK_THROWS_AS(design_bandpass(1.0, 260.0, kFs), InvalidParameter);
  CHECK_THROWS_AS(design_bandpass(70.0, 1.0, kFs), InvalidParameter);
  CHECK_THROWS_AS(design_bandpass(1.0, 70.0, kFs, 3, 8), InvalidParameter);
  FilterParams p;
  p.low_hz = 1.0;
  p.high_hz = 70.0;
  CHECK(design_filter(FilterKind::BandPass, p, kFs).sections.size() == 6);
}

TEST_CASE("apply_filter") {
  const auto chain = default_online_chain(kFs);

  SUBCASE("zeros stay zero") {
    StreamingFilter f(chain, 2.0);
    auto y = f.process(EegChunk(0.0, kFs, {"A", "B"}, 1000));
    for (double v : y.samples()) CHECK(v == 0.0);
  }

  SUBCASE("rate mismatch") {
    CHECK_THROWS_AS(apply_filter(single({1, 2, 3}, 250.0), chain[0]), ConfigurationError);
  }

  SUBCASE("carried state equals filtering the concatenation") {
    for (double prime : {0.0, 2.0}) {
      auto x = oracle::white(4000, 7);
      std::vector<double> a(x.begin(), x.begin() + 1700), b(x.begin() + 1700, x.end());
      StreamingFilter whole(chain, prime), parts(chain, prime);
      auto yw = whole.process(single(x));
      auto ya = parts.process(single(a));
      auto yb = parts.process(single(b, kFs, 1700 / kFs));
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(ya.channel(0)[i] - yw.channel(0)[i]) <= 1e-9);
      for (std::size_t i = 0; i < b.size(); ++i)
        CHECK(std::abs(yb.channel(0)[i] - yw.channel(0)[1700 + i]) <= 1e-9);
    }
  }

  SUBCASE("impulse response matches the difference equation") {
    const auto notch = chain[0];
    std::vector<double> x(64, 0.0);
    x[0] = 1.0;
    auto y = apply_filter(single(x), notch);
    const auto& s = notch.sections[0];
    std::vector<double> h(10, 0.0);
    for (int n = 0; n < 10; ++n) {
      const double xn = n == 0 ? 1.0 : 0.0;
      const double x1 = n == 1 ? 1.0 : 0.0;
      const double x2 = n == 2 ? 1.0 : 0.0;
      h[n] = s.b0 * xn + s.b1 * x1 + s.b2 * x2 - s.a1 * (n >= 1 ? h[n - 1] : 0.0) -
             s.a2 * (n >= 2 ? h[n - 2] : 0.0);
      CHECK(y.channel(0)[n] == doctest::Approx(h[n]).epsilon(1e-14));
    }
    // Whole cascade against the direct-form reference.
    std::vector<Biquad> all;
    for (const auto& f : chain) all.insert(all.end(), f.sections.begin(), f.sections.end());
    auto noise = oracle::white(2000, 3);
    StreamingFilter sf(chain);
    auto yc = sf.process(single(noise));
    auto yr = reference::filter_direct(noise, all);
    for (std::size_t i = 0; i < noise.size(); ++i) CHECK(std::abs(yc.channel(0)[i] - yr[i]) <= 1e-9);
  }

  SUBCASE("parallel and serial paths agree bitwise") {
    const auto labels = standard64_labels();
    std::vector<double> data = oracle::white(labels.size() * 1000, 11);
    EegChunk c(0.0, kFs, labels, data);
    StreamingFilter p(chain, 2.0), s(chain, 2.0);
    CHECK(p.process(c, Exec::Parallel) == s.process(c, Exec::Serial));
  }
}

TEST_CASE("welch_psd grid and normalization") {
  const std::size_t n = static_cast<std::size_t>(20 * kFs);

  SUBCASE("0.1 Hz resolution at 500 Hz with 10 s zero padding") {
    auto psd = welch_psd(single(std::vector<double>(n, 0.0)));
    CHECK(psd.resolution == 0.1);
    CHECK(psd.n_segments == 7);
    CHECK(psd.n_bins() == 2501);
    CHECK(psd.freqs.back() == doctest::Approx(250.0));
    for (std::size_t k = 1; k < psd.n_bins(); ++k)
      CHECK(psd.freqs[k] - psd.freqs[k - 1] == doctest::Approx(0.1).epsilon(1e-9));
    for (double v : psd.power) CHECK(v == 0.0);
  }

  SUBCASE("unit 10 Hz sinusoid integrates to its variance") {
    auto psd = welch_psd(single(oracle::sine(n, 10.0, kFs)));
    const double p = integrate_band(psd.freqs, psd.channel(0), 9.5, 10.5);
    CHECK(p == doctest::Approx(0.5).epsilon(0.05));
  }

  SUBCASE("Parseval on white noise") {
    auto x = oracle::white(n, 5, 3.0);
    auto psd = welch_psd(single(x));
    const double total = integrate_band(psd.freqs, psd.channel(0), 0.0, 250.0);
    CHECK(total == doctest::Approx(oracle::variance(x)).epsilon(0.05));
  }

  SUBCASE("non-negative for arbitrary input") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
      std::uniform_real_distribution<double> u(-1e3, 1e3);
      std::vector<double> x(3000);
      for (auto& v : x) v = u(rng) * (trial % 2 ? 1.0 : std::sin(0.01 * v));
      WelchOptions o;
      o.segment_seconds = 1.0;
      o.zero_pad_seconds = 2.0;
      auto psd = welch_psd(single(x), o);
      CHECK(*std::min_element(psd.power.begin(), psd.power.end()) >= 0.0);
    }
  }

  SUBCASE("FFT path matches the direct DFT reference") {
    WelchOptions o;
    o.segment_seconds = 1.0;
    o.zero_pad_seconds = 2.0;
    EegChunk c(0.0, kFs, {"A", "B"}, oracle::white(2 * 2600, 17));
    auto fast = welch_psd(c, o);
    auto ref = reference::welch_psd_dft(c, o);
    REQUIRE(fast.power.size() == ref.power.size());
    for (std::size_t i = 0; i < fast.power.size(); ++i)
      CHECK(fast.power[i] == doctest::Approx(ref.power[i]).epsilon(1e-9).scale(1e-12));
    CHECK(welch_psd(c, o, Exec::Serial).power == fast.power);
  }

  SUBCASE("too short") {
    CHECK_THROWS_AS(welch_psd(single(std::vector<double>(2499, 0.0))), InsufficientData);
  }
}

TEST_CASE("band_power") {
  const std::size_t n = static_cast<std::size_t>(20 * kFs);
  const BandRange alpha(8.0, 13.0, BandName::Alpha);

  SUBCASE("zero spectrum") {
    auto psd = welch_psd(posterior_chunk(std::vector<double>(n, 0.0)));
    CHECK(band_power(psd, alpha, ChannelSet::alpha_posterior()) == 0.0);
  }

  SUBCASE("unit sinusoid on every posterior channel") {
    auto psd = welch_psd(posterior_chunk(oracle::sine(n, 10.0, kFs)));
    CHECK(band_power(psd, alpha, ChannelSet::alpha_posterior()) == doctest::Approx(0.5).epsilon(0.05));
  }

  SUBCASE("white noise has equal power in equal-width bands") {
    double lo = 0.0, hi = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto psd = welch_psd(single(oracle::white(n, 1000 + seed)));
      lo += integrate_band(psd.freqs, psd.channel(0), 4.0, 8.0);
      hi += integrate_band(psd.freqs, psd.channel(0), 9.0, 13.0);
    }
    CHECK(lo / hi == doctest::Approx(1.0).epsilon(0.10));
  }

  SUBCASE("additive across adjacent bands, including off-grid edges") {
    auto psd = welch_psd(single(oracle::white(n, 4)));
    for (double edge : {8.0, 8.02, 8.37}) {
      const double a = integrate_band(psd.freqs, psd.channel(0), 4.02, edge);
      const double b = integrate_band(psd.freqs, psd.channel(0), edge, 12.99);
      const double ab = integrate_band(psd.freqs, psd.channel(0), 4.02, 12.99);
      CHECK(a + b == doctest::Approx(ab).epsilon(1e-12));
    }
  }

  SUBCASE("missing channels are listed") {
    auto psd = welch_psd(single(std::vector<double>(n, 0.0)));
    try {
      band_power(psd, alpha, ChannelSet::alpha_posterior());
      FAIL("expected an error");
    } catch (const ConfigurationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("POz") != std::string::npos);
      CHECK(msg.find("O2") != std::string::npos);
    }
  }

  SUBCASE("band outside the grid") {
    auto psd = welch_psd(single(std::vector<double>(n, 0.0)));
    CHECK_THROWS_AS(integrate_band(psd.freqs, psd.channel(0), 200.0, 300.0), InvalidParameter);
  }
}

TEST_CASE("common_average_reference") {
  SUBCASE("identical channels vanish") {
    auto x = oracle::white(100, 1);
    std::vector<double> d = x;
    d.insert(d.end(), x.begin(), x.end());
    d.insert(d.end(), x.begin(), x.end());
    auto y = common_average_reference(EegChunk(0.0, kFs, {"A", "B", "C"}, d));
    for (double v : y.samples()) CHECK(v == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("two channels") {
    auto y = common_average_reference(EegChunk(0.0, kFs, {"A", "B"}, std::vector<double>{3, 1, 1, 5}));
    CHECK(y.channel(0)[0] == 1.0);
    CHECK(y.channel(1)[0] == -1.0);
    CHECK(y.channel(0)[1] == -2.0);
    CHECK(y.channel(1)[1] == 2.0);
  }
  SUBCASE("column sums vanish") {
    EegChunk c(0.0, kFs, standard64_labels(), oracle::white(64 * 500, 8, 50.0));
    auto y = common_average_reference(c);
    for (std::size_t i = 0; i < y.n_samples(); ++i) {
      double s = 0.0;
      for (std::size_t ch = 0; ch < y.n_channels(); ++ch) s += y.channel(ch)[i];
      CHECK(std::abs(s) <= 1e-9);
    }
    CHECK(common_average_reference(c, Exec::Serial) == y);
  }
  SUBCASE("single channel") {
    CHECK_THROWS_AS(common_average_reference(single({1, 2})), InvalidOperation);
  }
}
