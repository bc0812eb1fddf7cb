#include "neuroloop/io/chunk_jsonl.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "neuroloop/errors.hpp"

namespace neuroloop::io {

using nlohmann::json;

std::int64_t to_micros(double seconds) { return std::llround(seconds * 1e6); }
double from_micros(std::int64_t us) { return static_cast<double>(us) / 1e6; }

json chunk_to_json(const dsp::EegChunk& chunk, const std::string& session_id) {
  json j;
  j["type"] = "eeg";
  if (!session_id.empty()) j["session_id"] = session_id;
  j["t_us"] = to_micros(chunk.start_time());
  j["sample_rate"] = chunk.sample_rate();
  j["channels"] = chunk.channel_labels();
  j["data"] = chunk.samples();
  return j;
}

dsp::EegChunk chunk_from_json(const json& msg) {
  if (!msg.is_object()) throw ProtocolError("eeg message must be a JSON object");
  auto field = [&](const char* name) -> const json& {
    auto it = msg.find(name);
    if (it == msg.end()) throw ProtocolError(std::string("eeg message missing field '") + name + "'");
    return *it;
  };
  const auto& t = field("t_us");
  const auto& fs = field("sample_rate");
  const auto& ch = field("channels");
  const auto& data = field("data");
  if (!t.is_number_integer()) throw ProtocolError("eeg.t_us must be an integer");
  if (!fs.is_number() || !(fs.get<double>() > 0.0)) throw ProtocolError("eeg.sample_rate must be > 0");
  if (!ch.is_array() || ch.empty()) throw ProtocolError("eeg.channels must be a non-empty array");
  if (!data.is_array() || data.empty()) throw ProtocolError("eeg.data must be a non-empty array");
  std::vector<std::string> labels;
  labels.reserve(ch.size());
  for (const auto& l : ch) {
    if (!l.is_string()) throw ProtocolError("eeg.channels entries must be strings");
    labels.push_back(l.get<std::string>());
  }
  std::vector<double> samples;
  samples.reserve(data.size());
  for (const auto& v : data) {
    if (!v.is_number()) throw ProtocolError("eeg.data entries must be numbers");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ProtocolError("eeg.data entries must be finite");
    samples.push_back(d);
  }
  if (samples.size() % labels.size() != 0) {
    throw ProtocolError("eeg.data length is not a multiple of the channel count");
  }
  try {
    return dsp::EegChunk(from_micros(t.get<std::int64_t>()), fs.get<double>(), std::move(labels),
                         std::move(samples));
  } catch (const InvalidParameter& e) {
    throw ProtocolError(std::string("invalid eeg chunk: ") + e.what());
  }
}

void write_chunks(std::ostream& out, std::span<const dsp::EegChunk> chunks,
                  const std::string& session_id) {
  for (const auto& c : chunks) out << chunk_to_json(c, session_id).dump() << '\n';
}

std::vector<dsp::EegChunk> read_chunks(std::istream& in) {
  std::vector<dsp::EegChunk> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    dsp::EegChunk chunk;
    try {
      chunk = chunk_from_json(j);
    } catch (const ProtocolError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!out.empty()) {
      const auto& prev = out.back();
      if (chunk.sample_rate() != prev.sample_rate() || chunk.channel_labels() != prev.channel_labels()) {
        throw ConfigurationError("line " + std::to_string(line_no) +
                                 ": sample rate or channel labels differ from previous chunks");
      }
      // Half-sample slack absorbs microsecond rounding of timestamps.
      const double slack = 0.5 / chunk.sample_rate();
      if (chunk.start_time() + slack < prev.end_time()) {
        throw SequencingError("line " + std::to_string(line_no) +
                              ": timestamp precedes the end of the previous chunk");
      }
    }
    out.push_back(std::move(chunk));
  }
  return out;
}

}  // namespace neuroloop::io
