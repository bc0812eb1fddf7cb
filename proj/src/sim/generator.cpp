#include "neuroloop/sim/generator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "neuroloop/dsp/fft.hpp"
#include "neuroloop/dsp/montage.hpp"
#include "neuroloop/dsp/spectrum.hpp"
#include "neuroloop/errors.hpp"
#include "neuroloop/io/chunk_jsonl.hpp"

namespace neuroloop::sim {

namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kPhaseStream = 2;
constexpr std::uint64_t kThetaWalk = 3;
constexpr std::uint64_t kAlphaWalk = 4;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Instantaneous frequency of a jittered oscillator, one value per sample.
std::vector<double> jittered_frequency(std::size_t n, double fs, double centre, double jitter,
                                       std::mt19937_64 rng) {
  std::vector<double> f(n, centre);
  if (jitter <= 0.0) return f;
  std::normal_distribution<double> step(0.0, jitter / 4.0);
  const auto hold = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * fs)));
  double offset = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % hold == 0) offset = std::clamp(offset + step(rng), -jitter, jitter);
    f[i] = centre + offset;
  }
  return f;
}

void add_oscillator(std::span<double> x, const std::vector<double>& freq, double fs, double amp,
                    double phase) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] += amp * std::sin(phase);
    phase += 2.0 * std::numbers::pi * freq[i] / fs;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
  }
}

}  // namespace

const char* to_string(StateName s) {
  switch (s) {
    case StateName::Internal: return "Internal";
    case StateName::External: return "External";
    case StateName::Neutral: return "Neutral";
    case StateName::Custom: return "Custom";
  }
  return "?";
}

StateName state_from_string(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "internal") return StateName::Internal;
  if (l == "external") return StateName::External;
  if (l == "neutral") return StateName::Neutral;
  if (l == "custom") return StateName::Custom;
  throw ConfigurationError("unknown state: " + s);
}

StateProfile StateProfile::neutral() { return {}; }

StateProfile StateProfile::internal() {
  StateProfile p;
  p.name = StateName::Internal;
  p.theta_uv *= 1.3;
  p.alpha_uv *= 1.3;
  return p;
}

StateProfile StateProfile::external() {
  StateProfile p;
  p.name = StateName::External;
  p.theta_uv *= 0.7;
  p.alpha_uv *= 0.7;
  return p;
}

StateProfile StateProfile::named(StateName name) {
  switch (name) {
    case StateName::Internal: return internal();
    case StateName::External: return external();
    default: {
      StateProfile p = neutral();
      p.name = name;
      return p;
    }
  }
}

void StateProfile::validate() const {
  if (theta_uv < 0.0 || alpha_uv < 0.0) throw ConfigurationError("oscillator amplitudes must be >= 0");
  if (!(noise_uv > 0.0)) throw ConfigurationError("noise level must be > 0");
}

std::vector<double> spectral_noise(std::size_t n, double sample_rate,
                                   const std::function<double(double)>& psd, std::uint64_t seed) {
  if (n < 2) throw InvalidParameter("spectral_noise: need at least two samples");
  const dsp::RealFft fft(n);
  dsp::FftBuffer<std::complex<double>> spec(fft.bins());
  dsp::FftBuffer<double> out(n);
  auto rng = make_rng(seed, kNoiseStream);
  std::normal_distribution<double> g(0.0, 1.0);
  const double df = sample_rate / static_cast<double>(n);
  auto* X = spec.data();
  X[0] = 0.0;
  for (std::size_t k = 1; k < fft.bins(); ++k) {
    const double re = g(rng);
    const double im = g(rng);
    const bool nyquist = n % 2 == 0 && k == n / 2;
    if (nyquist) {
      X[k] = 0.0;
      continue;
    }
    const double s = psd(static_cast<double>(k) * df);
    const double a = static_cast<double>(n) * std::sqrt(std::max(s, 0.0) * df) / 2.0;
    X[k] = {a * re, a * im};
  }
  fft.inverse(spec.span(), out.span());
  std::vector<double> x(out.data(), out.data() + n);
  for (double& v : x) v /= static_cast<double>(n);
  return x;
}

double pink_scale(std::size_t n, double sample_rate, double rms, double beta, double f_min) {
  const double df = sample_rate / static_cast<double>(n);
  double sum = 0.0;
  const std::size_t last = n % 2 == 0 ? n / 2 - 1 : n / 2;
  for (std::size_t k = 1; k <= last; ++k) {
    sum += std::pow(std::max(static_cast<double>(k) * df, f_min), -beta) * df;
  }
  return rms * rms / sum;
}

dsp::EegChunk generate(const StateProfile& profile, double duration_s, std::uint64_t seed,
                       const GeneratorConfig& config, dsp::Exec exec) {
  profile.validate();
  if (!(duration_s >= 1.0)) throw InvalidParameter("generate: duration must be >= 1 s");
  const auto labels = config.channel_labels.empty() ? dsp::standard64_labels() : config.channel_labels;
  const double fs = config.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));

  const auto theta_set = dsp::ChannelSet::theta_frontal();
  const auto alpha_set = dsp::ChannelSet::alpha_posterior();
  dsp::EegChunk out(config.start_time, fs, labels, n);
  enum Role { kNone, kTheta, kAlpha };
  std::vector<Role> role(labels.size(), kNone);
  std::string missing;
  auto assign = [&](const dsp::ChannelSet& set, Role r) {
    for (const auto& l : set.labels) {
      const auto i = out.index_of(l);
      if (i == dsp::EegChunk::npos) {
        missing += " " + l;
      } else {
        role[i] = r;
      }
    }
  };
  assign(theta_set, kTheta);
  assign(alpha_set, kAlpha);
  if (!missing.empty()) throw ConfigurationError("generate: montage lacks channels:" + missing);

  const double theta_centre = 0.5 * (config.bands.theta.low + config.bands.theta.high);
  const double alpha_centre = 0.5 * (config.bands.alpha.low + config.bands.alpha.high);
  const auto theta_freq = jittered_frequency(n, fs, theta_centre, config.jitter_hz, make_rng(seed, kThetaWalk));
  const auto alpha_freq = jittered_frequency(n, fs, alpha_centre, config.jitter_hz, make_rng(seed, kAlphaWalk));
  const double c = pink_scale(n, fs, profile.noise_uv, profile.noise_exponent, config.noise_min_hz);
  const double beta = profile.noise_exponent;
  const double fmin = config.noise_min_hz;
  const auto pink = [c, beta, fmin](double f) { return c * std::pow(std::max(f, fmin), -beta); };

  const auto nc = static_cast<std::ptrdiff_t>(labels.size());
#pragma omp parallel for if (exec == dsp::Exec::Parallel) schedule(dynamic)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    const auto ch = static_cast<std::size_t>(ci);
    // Per-channel seeds keep output independent of thread scheduling.
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(ch)};
    std::uint32_t noise_seed[2];
    seq.generate(noise_seed, noise_seed + 2);
    const auto noise = spectral_noise(
        n, fs, pink, (static_cast<std::uint64_t>(noise_seed[0]) << 32) | noise_seed[1]);
    auto x = out.channel(ch);
    std::copy(noise.begin(), noise.end(), x.begin());
    auto prng = make_rng(seed, kPhaseStream, ch);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(prng);
    if (role[ch] == kTheta && profile.theta_uv > 0.0) add_oscillator(x, theta_freq, fs, profile.theta_uv, phase);
    if (role[ch] == kAlpha && profile.alpha_uv > 0.0) add_oscillator(x, alpha_freq, fs, profile.alpha_uv, phase);
  }
  return out;
}

void Scenario::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigurationError("scenario: sample_rate must be > 0");
  if (!(chunk_seconds > 0.0)) throw ConfigurationError("scenario: chunk length must be > 0");
  for (const auto& s : segments) {
    if (!(s.duration_s > 0.0)) throw ConfigurationError("scenario: segment durations must be > 0");
    s.profile.validate();
  }
}

ScenarioStream::ScenarioStream(Scenario scenario) : scenario_(std::move(scenario)) {
  scenario_.validate();
}

std::optional<LabeledChunk> ScenarioStream::next() {
  while (segment_ < scenario_.segments.size()) {
    const auto& seg = scenario_.segments[segment_];
    if (!current_) {
      GeneratorConfig cfg;
      cfg.sample_rate = scenario_.sample_rate;
      cfg.channel_labels = scenario_.channel_labels;
      cfg.bands = scenario_.bands;
      cfg.start_time = t_;
      // Segment seeds derive from the scenario seed and the segment ordinal.
      std::seed_seq seq{static_cast<std::uint32_t>(scenario_.seed),
                        static_cast<std::uint32_t>(scenario_.seed >> 32),
                        static_cast<std::uint32_t>(segment_), 0x5eedu};
      std::uint32_t s[2];
      seq.generate(s, s + 2);
      current_ = generate(seg.profile, seg.duration_s, (static_cast<std::uint64_t>(s[0]) << 32) | s[1], cfg);
      offset_ = 0;
    }
    const auto quantum = static_cast<std::size_t>(std::llround(scenario_.chunk_seconds * scenario_.sample_rate));
    if (offset_ < current_->n_samples()) {
      const auto count = std::min(quantum, current_->n_samples() - offset_);
      LabeledChunk out{current_->slice(offset_, count), seg.profile.name};
      offset_ += count;
      return out;
    }
    t_ = current_->end_time();
    current_.reset();
    ++segment_;
  }
  return std::nullopt;
}

std::vector<LabeledChunk> run_scenario(const Scenario& scenario) {
  ScenarioStream stream(scenario);
  std::vector<LabeledChunk> out;
  while (auto c = stream.next()) out.push_back(std::move(*c));
  return out;
}

void produce(const Scenario& scenario, util::BoundedQueue<LabeledChunk>& queue) {
  ScenarioStream stream(scenario);
  while (auto c = stream.next()) {
    if (!queue.push(std::move(*c))) break;
  }
  queue.close();
}

Scenario parse_scenario(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what(), 0);
  }
  try {
    Scenario s;
    s.seed = j.value("seed", std::uint64_t{0});
    s.sample_rate = j.value("sample_rate", 500.0);
    s.channel_labels = dsp::montage_labels(j.value("montage", std::string("standard64")));
    s.chunk_seconds = j.value("chunk_seconds", 1.0);
    if (j.contains("bands")) {
      const auto& b = j.at("bands");
      s.bands.theta = dsp::BandRange(b.at("theta").at(0), b.at("theta").at(1), dsp::BandName::Theta);
      s.bands.alpha = dsp::BandRange(b.at("alpha").at(0), b.at("alpha").at(1), dsp::BandName::Alpha);
    }
    for (const auto& seg : j.at("segments")) {
      Segment out;
      out.profile = StateProfile::named(state_from_string(seg.at("state").get<std::string>()));
      out.duration_s = seg.at("duration_s").get<double>();
      if (seg.contains("overrides")) {
        const auto& o = seg.at("overrides");
        out.profile.theta_uv = o.value("theta_uv", out.profile.theta_uv);
        out.profile.alpha_uv = o.value("alpha_uv", out.profile.alpha_uv);
        out.profile.noise_uv = o.value("noise_uv", out.profile.noise_uv);
        out.profile.noise_exponent = o.value("noise_exponent", out.profile.noise_exponent);
      }
      s.segments.push_back(out);
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::vector<dsp::EegChunk> load_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open replay file: " + path);
  return io::read_chunks(in);
}

}  // namespace neuroloop::sim
