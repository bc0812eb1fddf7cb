#include "neuroloop/bridge/session.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "neuroloop/bridge/clock.hpp"
#include "neuroloop/dsp/montage.hpp"
#include "neuroloop/errors.hpp"
#include "neuroloop/io/chunk_jsonl.hpp"

namespace neuroloop::bridge {

using nlohmann::json;

SessionLog::SessionLog(const std::string& dir, const std::string& session_id) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir) / session_id;
  path_ = base.string() + ".jsonl";
  chunk_path_ = base.string() + ".eeg.jsonl";
  log_ = std::make_unique<std::ofstream>(path_);
  chunks_ = std::make_unique<std::ofstream>(chunk_path_);
  if (!*log_ || !*chunks_) throw ConfigurationError("cannot open session log in " + dir);
}

void SessionLog::record(const json& line) {
  if (!log_) return;
  *log_ << dump_line(line) << '\n';
  log_->flush();
}

void SessionLog::record_chunk(const dsp::EegChunk& chunk, const std::string& session_id) {
  if (!chunks_) return;
  *chunks_ << dump_line(io::chunk_to_json(chunk, session_id)) << '\n';
  chunks_->flush();
}

std::string log_directory(const std::string& fallback) {
  const char* env = std::getenv("NEUROLOOP_LOG_DIR");
  return env && *env ? std::string(env) : fallback;
}

json error_message(const std::string& code, const std::string& message, const std::string& session_id,
                   std::optional<std::size_t> offset) {
  json j = {{"type", "error"}, {"code", code}, {"message", message}};
  if (!session_id.empty()) j["session_id"] = session_id;
  if (offset) j["offset"] = *offset;
  return j;
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

Session::Session(SessionConfig defaults, std::string log_dir, std::string default_id)
    : defaults_(std::move(defaults)), log_dir_(std::move(log_dir)), id_(std::move(default_id)) {}

Outgoing Session::malformed(const std::string& what, std::size_t byte_offset) {
  return {{error_message("malformed_json", what, started() ? id_ : "", byte_offset)}, false};
}

Outgoing Session::handle(const json& msg, std::int64_t received_us) {
  if (closed_) return {{error_message("closed", "session is closed", id_)}, true};
  auto fail = [&](const char* code, const std::string& what, bool close) {
    if (close) closed_ = true;
    if (started()) log_.record({{"event", "error"}, {"code", code}, {"message", what}});
    return Outgoing{{error_message(code, what, started() ? id_ : "")}, close};
  };
  try {
    return dispatch(msg, received_us);
  } catch (const ProtocolError& e) {
    return fail("protocol", e.what(), true);
  } catch (const ClockAnomaly& e) {
    return fail("clock", e.what(), false);
  } catch (const ConfigurationError& e) {
    return fail("config", e.what(), true);
  } catch (const SequencingError& e) {
    return fail("sequencing", e.what(), true);
  } catch (const Error& e) {
    return fail("invalid", e.what(), true);
  } catch (const json::exception& e) {
    return fail("protocol", e.what(), true);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), true);
  }
}

Outgoing Session::dispatch(const json& msg, std::int64_t received_us) {
  if (!msg.is_object()) throw ProtocolError("message must be a JSON object");
  const auto it = msg.find("type");
  if (it == msg.end() || !it->is_string()) throw ProtocolError("message lacks a string 'type'");
  const auto type = it->get<std::string>();

  if (!started()) {
    if (type != "hello") throw ProtocolError("expected hello, got " + type);
    return on_hello(msg);
  }
  const auto sid = msg.find("session_id");
  if (sid == msg.end() || !sid->is_string() || sid->get<std::string>() != id_) {
    throw ProtocolError("message must carry session_id " + id_);
  }
  if (type == "eeg") return on_eeg(msg);
  if (type == "event") return on_event(msg);
  if (type == "time_req") return on_time_req(msg, received_us);
  if (type == "bye") return on_bye();
  if (type == "hello") throw ProtocolError("duplicate hello");
  if (type == "config" || type == "decision" || type == "time_resp") {
    throw ProtocolError("'" + type + "' is sent by the server only");
  }
  throw ProtocolError("unknown message type: " + type);
}

Outgoing Session::on_hello(const json& msg) {
  SessionConfig c = defaults_;
  if (msg.contains("session_id")) {
    const auto& s = msg.at("session_id");
    if (!s.is_string() || s.get<std::string>().empty()) throw ProtocolError("session_id must be a non-empty string");
    const auto id = s.get<std::string>();
    if (id.find_first_of("/\\") != std::string::npos || id == "." || id == "..") {
      throw ProtocolError("session_id must not contain path separators");
    }
    id_ = id;
  }
  if (msg.contains("policy")) c.policy = adapt::policy_from_string(msg.at("policy").get<std::string>());
  if (msg.contains("threshold")) c.threshold = msg.at("threshold").get<double>();
  if (msg.contains("window_s")) c.window_s = msg.at("window_s").get<double>();
  if (msg.contains("sample_rate")) c.sample_rate = msg.at("sample_rate").get<double>();
  if (msg.contains("stream")) {
    const auto& s = msg.at("stream");
    c.stream = adapt::StreamState::starting_at(s.value("initial", c.stream.initial),
                                               s.value("floor", c.stream.floor),
                                               s.value("ceiling", c.stream.ceiling));
  }
  if (msg.contains("montage")) {
    c.montage = msg.at("montage").get<std::string>();
    c.channel_labels.clear();
  }
  if (msg.contains("channels")) c.channel_labels = msg.at("channels").get<std::vector<std::string>>();
  if (msg.contains("allow_fallback_bands")) c.allow_fallback_bands = msg.at("allow_fallback_bands").get<bool>();
  c = resolve(c);
  if (c.window_s < 5.0) throw ConfigurationError("window_s must be >= 5 s (one Welch segment)");

  orch_ = std::make_unique<SessionOrchestrator>(c);
  log_ = SessionLog(log_dir_, id_);
  const auto& r = orch_->config();
  json cfg = {{"type", "config"},
              {"session_id", id_},
              {"policy", adapt::to_string(r.policy)},
              {"threshold", r.threshold},
              {"window_s", r.window_s},
              {"stream", {{"initial", r.stream.initial}, {"floor", r.stream.floor}, {"ceiling", r.stream.ceiling}}},
              {"montage", r.montage},
              {"sample_rate", r.sample_rate},
              {"channels", r.channel_labels},
              {"bands", {{"theta", {orch_->bands().theta.low, orch_->bands().theta.high}},
                         {"alpha", {orch_->bands().alpha.low, orch_->bands().alpha.high}}}}};
  json start = cfg;
  start.erase("type");
  start["event"] = "session_start";
  log_.record(start);
  return {{cfg}, false};
}

json Session::event_message(json ev) const {
  json m = {{"type", "event"}, {"session_id", id_}, {"name", ev.at("event")}};
  ev.erase("event");
  m.update(ev);
  return m;
}

void Session::log_events(Outgoing& out, std::vector<json> events, bool send) {
  for (auto& ev : events) {
    log_.record(ev);
    if (send) out.messages.push_back(event_message(ev));
  }
}

Outgoing Session::on_eeg(const json& msg) {
  auto chunk = io::chunk_from_json(msg);
  const auto& cfg = orch_->config();
  if (chunk.n_channels() != cfg.channel_labels.size()) {
    throw ProtocolError("eeg carries " + std::to_string(chunk.n_channels()) + " channels, session expects " +
                        std::to_string(cfg.channel_labels.size()));
  }
  if (chunk.channel_labels() != cfg.channel_labels) throw ProtocolError("eeg channel labels differ from the session");
  if (chunk.sample_rate() != cfg.sample_rate) throw ProtocolError("eeg sample_rate differs from the session");
  const auto t_us = msg.at("t_us").get<std::int64_t>() + static_cast<std::int64_t>(std::llround(offset_us_));
  chunk.set_start_time(io::from_micros(t_us));

  Outgoing out;
  const auto decisions = orch_->ingest(chunk);
  log_.record_chunk(chunk, id_);
  log_events(out, orch_->take_pending_events(), false);
  for (const auto& d : decisions) {
    const auto rec = adapt::to_json(d);
    log_.record(rec);
    json m = {{"type", "decision"}, {"session_id", id_}};
    m.update(rec);
    out.messages.push_back(std::move(m));
  }
  last_time_ = chunk.end_time();
  return out;
}

Outgoing Session::on_event(const json& msg) {
  const auto name = msg.at("name").get<std::string>();
  const double t = msg.contains("t_us")
                       ? io::from_micros(msg.at("t_us").get<std::int64_t>() +
                                         static_cast<std::int64_t>(std::llround(offset_us_)))
                       : last_time_;
  Outgoing out;
  if (name == "block_start") {
    log_events(out, orch_->start_block(block_from_string(msg.at("block").get<std::string>()), t), true);
  } else if (name == "block_end") {
    log_events(out, orch_->end_block(t), true);
  } else if (name == "clock_offset") {
    json ev = {{"event", "clock_offset"}};
    if (msg.contains("offset_us")) {
      offset_us_ = msg.at("offset_us").get<double>();
      if (!std::isfinite(offset_us_)) throw ProtocolError("offset_us must be finite");
    } else {
      const auto c = estimate_offset(msg.at("t1").get<std::int64_t>(), msg.at("t2").get<std::int64_t>(),
                                     msg.at("t3").get<std::int64_t>(), msg.at("t4").get<std::int64_t>());
      offset_us_ = c.offset;
      ev["round_trip_us"] = c.round_trip;
    }
    ev["offset_us"] = offset_us_;
    log_events(out, {ev}, true);
  } else {
    out.messages.push_back(error_message("unknown_event", "unknown event name: " + name, id_));
  }
  return out;
}

Outgoing Session::on_time_req(const json& msg, std::int64_t received_us) {
  const auto t1 = msg.at("t1").get<std::int64_t>();
  return {{{{"type", "time_resp"}, {"session_id", id_}, {"t1", t1}, {"t2", received_us}, {"t3", monotonic_micros()}}},
          false};
}

Outgoing Session::on_bye() {
  Outgoing out;
  log_events(out, orch_->end_block(last_time_), false);
  log_.record({{"event", "session_end"}, {"t", last_time_}, {"decisions", orch_->decisions().size()}});
  out.messages.push_back({{"type", "bye"}, {"session_id", id_}, {"decisions", orch_->decisions().size()}});
  out.close = true;
  closed_ = true;
  return out;
}

void Session::finish() {
  if (!started() || closed_) return;
  closed_ = true;
  try {
    for (auto& ev : orch_->end_block(last_time_)) log_.record(ev);
    log_.record({{"event", "session_end"}, {"t", last_time_}, {"decisions", orch_->decisions().size()}});
  } catch (const std::exception&) {
    // the connection is already gone; nothing left to report to
  }
}

}  // namespace neuroloop::bridge
