#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace neuroloop::dsp {

// Block of multichannel samples, row-major [channel][sample], in microvolts.
class EegChunk {
 public:
  EegChunk() = default;
  EegChunk(double start_time, double sample_rate,
           std::vector<std::string> channel_labels, std::size_t n_samples);
  EegChunk(double start_time, double sample_rate,
           std::vector<std::string> channel_labels, std::vector<double> samples);

  double start_time() const { return start_time_; }
  double sample_rate() const { return sample_rate_; }
  const std::vector<std::string>& channel_labels() const { return labels_; }
  std::size_t n_channels() const { return labels_.size(); }
  std::size_t n_samples() const { return n_samples_; }
  double duration() const { return static_cast<double>(n_samples_) / sample_rate_; }
  double end_time() const { return start_time_ + duration(); }

  std::span<double> channel(std::size_t c) {
    return {samples_.data() + c * n_samples_, n_samples_};
  }
  std::span<const double> channel(std::size_t c) const {
    return {samples_.data() + c * n_samples_, n_samples_};
  }
  const std::vector<double>& samples() const { return samples_; }
  std::vector<double>& samples() { return samples_; }

  // Index of a label, or npos when absent.
  std::size_t index_of(const std::string& label) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  void set_start_time(double t) { start_time_ = t; }

  // Samples [first, first + count) of every channel; start time advanced accordingly.
  EegChunk slice(std::size_t first, std::size_t count) const;

  // Subset of channels, in the given order.
  EegChunk select(const std::vector<std::string>& labels) const;

  bool operator==(const EegChunk&) const = default;

 private:
  void validate() const;

  double start_time_ = 0.0;
  double sample_rate_ = 500.0;
  std::vector<std::string> labels_;
  std::size_t n_samples_ = 0;
  std::vector<double> samples_;
};

// Joins chunks sharing rate and labels, in the given order. Start time is taken
// from the first chunk; gaps are not checked.
EegChunk concatenate(std::span<const EegChunk> chunks);

}  // namespace neuroloop::dsp
