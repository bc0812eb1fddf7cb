#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuroloop/bridge/orchestrator.hpp"

namespace neuroloop::bridge {

// Writes <dir>/<id>.jsonl (decisions and events) and <dir>/<id>.eeg.jsonl (the
// ingested chunks on the session clock, replayable). Empty dir disables logging.
class SessionLog {
 public:
  SessionLog() = default;
  SessionLog(const std::string& dir, const std::string& session_id);

  void record(const nlohmann::json& line);
  void record_chunk(const dsp::EegChunk& chunk, const std::string& session_id);
  bool enabled() const { return static_cast<bool>(log_); }
  std::string path() const { return path_; }
  std::string chunk_path() const { return chunk_path_; }

 private:
  std::unique_ptr<std::ofstream> log_, chunks_;
  std::string path_, chunk_path_;
};

// Log directory: NEUROLOOP_LOG_DIR when set, else `fallback`.
std::string log_directory(const std::string& fallback);

struct Outgoing {
  std::vector<nlohmann::json> messages;
  bool close = false;
};

nlohmann::json error_message(const std::string& code, const std::string& message,
                             const std::string& session_id = {},
                             std::optional<std::size_t> offset = std::nullopt);

// Serializes without throwing on invalid UTF-8 (bytes are replaced).
std::string dump_line(const nlohmann::json& j);

// Protocol state for one connection. Messages are handled strictly in order by
// one thread; any error is turned into an `error` message.
class Session {
 public:
  Session(SessionConfig defaults, std::string log_dir, std::string default_id);

  // received_us: server monotonic time when the line arrived (t2 for time_req).
  Outgoing handle(const nlohmann::json& msg, std::int64_t received_us);
  Outgoing malformed(const std::string& what, std::size_t byte_offset);
  // Connection went away: closes the open block and flushes the log.
  void finish();

  bool closed() const { return closed_; }
  bool started() const { return orch_ != nullptr; }
  const std::string& id() const { return id_; }
  double clock_offset_us() const { return offset_us_; }
  const SessionOrchestrator* orchestrator() const { return orch_.get(); }
  const SessionLog& log() const { return log_; }

 private:
  Outgoing dispatch(const nlohmann::json& msg, std::int64_t received_us);
  Outgoing on_hello(const nlohmann::json& msg);
  Outgoing on_eeg(const nlohmann::json& msg);
  Outgoing on_event(const nlohmann::json& msg);
  Outgoing on_time_req(const nlohmann::json& msg, std::int64_t received_us);
  Outgoing on_bye();
  nlohmann::json event_message(nlohmann::json ev) const;
  void log_events(Outgoing& out, std::vector<nlohmann::json> events, bool send);

  SessionConfig defaults_;
  std::string log_dir_;
  std::string id_;
  std::unique_ptr<SessionOrchestrator> orch_;
  SessionLog log_;
  double offset_us_ = 0.0;
  double last_time_ = 0.0;
  bool closed_ = false;
};

}  // namespace neuroloop::bridge
