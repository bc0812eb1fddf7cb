#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuroloop/dsp/eeg_chunk.hpp"

namespace neuroloop::io {

// `eeg` message: {"type":"eeg","session_id":..,"t_us":..,"sample_rate":..,
// "channels":[..],"data":[row-major samples]}. session_id is omitted when empty.
nlohmann::json chunk_to_json(const dsp::EegChunk& chunk, const std::string& session_id = {});

// Throws ProtocolError when the object does not follow the schema.
dsp::EegChunk chunk_from_json(const nlohmann::json& msg);

std::int64_t to_micros(double seconds);
double from_micros(std::int64_t us);

void write_chunks(std::ostream& out, std::span<const dsp::EegChunk> chunks,
                  const std::string& session_id = {});

// Reads a chunk file. Malformed lines raise ParseError (1-based line number);
// decreasing or overlapping timestamps raise SequencingError; rate or channel
// changes raise ConfigurationError. Blank lines are skipped.
std::vector<dsp::EegChunk> read_chunks(std::istream& in);

}  // namespace neuroloop::io
