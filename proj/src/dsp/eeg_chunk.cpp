#include "neuroloop/dsp/eeg_chunk.hpp"

#include <algorithm>
#include <set>

#include "neuroloop/errors.hpp"

namespace neuroloop::dsp {

EegChunk::EegChunk(double start_time, double sample_rate,
                   std::vector<std::string> channel_labels, std::size_t n_samples)
    : start_time_(start_time),
      sample_rate_(sample_rate),
      labels_(std::move(channel_labels)),
      n_samples_(n_samples),
      samples_(labels_.size() * n_samples, 0.0) {
  validate();
}

EegChunk::EegChunk(double start_time, double sample_rate,
                   std::vector<std::string> channel_labels, std::vector<double> samples)
    : start_time_(start_time),
      sample_rate_(sample_rate),
      labels_(std::move(channel_labels)),
      samples_(std::move(samples)) {
  if (labels_.empty()) throw InvalidParameter("EegChunk: no channels");
  if (samples_.size() % labels_.size() != 0) {
    throw InvalidParameter("EegChunk: sample count is not a multiple of the channel count");
  }
  n_samples_ = samples_.size() / labels_.size();
  validate();
}

void EegChunk::validate() const {
  if (!(sample_rate_ > 0.0)) throw InvalidParameter("EegChunk: sample_rate must be > 0");
  if (labels_.empty()) throw InvalidParameter("EegChunk: no channels");
  if (n_samples_ < 1) throw InvalidParameter("EegChunk: n_samples must be >= 1");
  std::set<std::string> seen(labels_.begin(), labels_.end());
  if (seen.size() != labels_.size()) {
    throw InvalidParameter("EegChunk: channel labels must be unique");
  }
}

std::size_t EegChunk::index_of(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  return it == labels_.end() ? npos : static_cast<std::size_t>(it - labels_.begin());
}

EegChunk EegChunk::slice(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > n_samples_) {
    throw InvalidParameter("EegChunk::slice: range out of bounds");
  }
  EegChunk out(start_time_ + static_cast<double>(first) / sample_rate_, sample_rate_,
               labels_, count);
  for (std::size_t c = 0; c < n_channels(); ++c) {
    auto src = channel(c).subspan(first, count);
    std::copy(src.begin(), src.end(), out.channel(c).begin());
  }
  return out;
}

EegChunk EegChunk::select(const std::vector<std::string>& labels) const {
  std::vector<std::string> missing;
  std::vector<std::size_t> idx;
  for (const auto& l : labels) {
    auto i = index_of(l);
    if (i == npos) missing.push_back(l);
    idx.push_back(i);
  }
  if (!missing.empty()) {
    std::string msg = "channels not present:";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigurationError(msg);
  }
  EegChunk out(start_time_, sample_rate_, labels, n_samples_);
  for (std::size_t c = 0; c < idx.size(); ++c) {
    auto src = channel(idx[c]);
    std::copy(src.begin(), src.end(), out.channel(c).begin());
  }
  return out;
}

EegChunk concatenate(std::span<const EegChunk> chunks) {
  if (chunks.empty()) throw InsufficientData("concatenate: no chunks");
  const auto& first = chunks.front();
  std::size_t total = 0;
  for (const auto& c : chunks) {
    if (c.sample_rate() != first.sample_rate() || c.channel_labels() != first.channel_labels()) {
      throw ConfigurationError("concatenate: chunks differ in rate or channel labels");
    }
    total += c.n_samples();
  }
  EegChunk out(first.start_time(), first.sample_rate(), first.channel_labels(), total);
  for (std::size_t ch = 0; ch < first.n_channels(); ++ch) {
    auto dst = out.channel(ch).begin();
    for (const auto& c : chunks) {
      auto src = c.channel(ch);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

}  // namespace neuroloop::dsp
