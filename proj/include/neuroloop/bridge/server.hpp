#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "neuroloop/bridge/orchestrator.hpp"

namespace neuroloop::bridge {

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  SessionConfig defaults{};
  std::string log_dir;  // empty: no session logs
  std::size_t queue_capacity = 256;
  double lag_seconds = 10.0;  // queued eeg above this triggers a lag event
  std::size_t max_line_bytes = std::size_t{16} << 20;
};

// "host:port", "port" or ":port".
std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind);

// NDJSON-over-TCP stream server. One Session per connection; a reader thread
// parses lines into a bounded queue drained in order by a worker thread.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting. Throws ConfigurationError if the port is taken.
  void start();
  void stop();
  std::uint16_t port() const { return port_; }
  bool running() const { return running_; }

  std::size_t connections_accepted() const { return accepted_; }
  std::size_t connections_open() const;

 private:
  struct Connection;
  void accept_loop();
  void serve_connection(Connection& c);
  void reap(bool all);

  ServerOptions opts_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> accepted_{0};
  std::thread acceptor_;
  mutable std::mutex conns_mu_;
  std::list<std::unique_ptr<Connection>> conns_;
};

// Blocking line client, used by tests and the replay-vs-live tooling.
class LineClient {
 public:
  LineClient(const std::string& host, std::uint16_t port);
  ~LineClient();
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  // False once the peer is gone.
  bool send_line(const std::string& line);
  bool send(const nlohmann::json& msg);
  // nullopt on timeout or when the peer closed.
  std::optional<std::string> read_line(int timeout_ms = 5000);
  std::optional<nlohmann::json> read_json(int timeout_ms = 5000);
  // True when the server closed the connection (EOF seen within timeout).
  bool wait_closed(int timeout_ms = 5000);
  void close();

 private:
  int fd_ = -1;
  std::string buf_;
  bool eof_ = false;
};

}  // namespace neuroloop::bridge
