#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neuroloop/dsp/eeg_chunk.hpp"
#include "neuroloop/dsp/exec.hpp"
#include "neuroloop/iaf/iaf.hpp"
#include "neuroloop/util/bounded_queue.hpp"

namespace neuroloop::sim {

enum class StateName { Internal, External, Neutral, Custom };

const char* to_string(StateName s);
StateName state_from_string(const std::string& s);

struct StateProfile {
  StateName name = StateName::Neutral;
  double theta_uv = 6.0;        // oscillator amplitude on the frontal set
  double alpha_uv = 10.0;       // oscillator amplitude on the posterior set
  double noise_uv = 4.0;        // broadband RMS
  double noise_exponent = 1.0;  // 1/f^beta

  static StateProfile neutral();
  // Neutral with alpha and theta amplitudes scaled by 1.3.
  static StateProfile internal();
  // Neutral with alpha and theta amplitudes scaled by 0.7.
  static StateProfile external();
  static StateProfile named(StateName name);

  void validate() const;
};

struct GeneratorConfig {
  double sample_rate = 500.0;
  std::vector<std::string> channel_labels;  // defaults to standard64 when empty
  iaf::IndividualBands bands = iaf::IndividualBands::canonical();
  double jitter_hz = 0.2;
  double noise_min_hz = 0.5;  // 1/f shape is held flat below this
  double start_time = 0.0;
};

// Real sequence of n samples whose expected one-sided PSD is psd(f), µV²/Hz,
// synthesized with random Gaussian Fourier coefficients. DC and Nyquist are zero.
std::vector<double> spectral_noise(std::size_t n, double sample_rate,
                                   const std::function<double(double)>& psd, std::uint64_t seed);

// Scale c of the 1/f^beta density c * max(f, f_min)^-beta whose integral over the
// discrete grid of an n-sample record equals rms^2.
double pink_scale(std::size_t n, double sample_rate, double rms, double beta, double f_min);

dsp::EegChunk generate(const StateProfile& profile, double duration_s, std::uint64_t seed,
                       const GeneratorConfig& config = {}, dsp::Exec exec = dsp::Exec::Parallel);

struct Segment {
  StateProfile profile;
  double duration_s = 0.0;
};

struct Scenario {
  std::vector<Segment> segments;
  std::uint64_t seed = 0;
  double sample_rate = 500.0;
  std::vector<std::string> channel_labels;  // standard64 when empty
  iaf::IndividualBands bands = iaf::IndividualBands::canonical();
  double chunk_seconds = 1.0;

  void validate() const;
};

struct LabeledChunk {
  dsp::EegChunk chunk;
  StateName label;
};

// Lazily generates a scenario segment by segment and hands out fixed-length chunks.
class ScenarioStream {
 public:
  explicit ScenarioStream(Scenario scenario);
  std::optional<LabeledChunk> next();

 private:
  Scenario scenario_;
  std::size_t segment_ = 0;
  std::size_t offset_ = 0;
  double t_ = 0.0;
  std::optional<dsp::EegChunk> current_;
};

std::vector<LabeledChunk> run_scenario(const Scenario& scenario);

// Producer side of the bounded-buffer contract: pushes every chunk, then closes.
void produce(const Scenario& scenario, util::BoundedQueue<LabeledChunk>& queue);

// JSON scenario file: {segments: [{state, duration_s, overrides}], seed, sample_rate, montage}.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

// Chunk JSON-lines file, in timestamp order.
std::vector<dsp::EegChunk> load_replay(const std::string& path);

}  // namespace neuroloop::sim
