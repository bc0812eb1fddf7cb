#include "neuroloop/bridge/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>

#include "neuroloop/bridge/clock.hpp"
#include "neuroloop/bridge/session.hpp"
#include "neuroloop/errors.hpp"
#include "neuroloop/util/bounded_queue.hpp"

namespace neuroloop::bridge {

using nlohmann::json;

namespace {

constexpr int kPollMs = 100;
constexpr std::int64_t kLingerMicros = 2'000'000;

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

std::string default_session_id() {
  static std::atomic<unsigned> counter{0};
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%S", &tm);
  return "session-" + std::string(stamp) + "-" + std::to_string(::getpid()) + "-" + std::to_string(++counter);
}

// Seconds of signal in an eeg message, 0 for anything else or a bad schema.
double eeg_seconds(const json& msg) {
  if (!msg.is_object()) return 0.0;
  const auto t = msg.find("type");
  if (t == msg.end() || *t != "eeg") return 0.0;
  const auto d = msg.find("data");
  const auto c = msg.find("channels");
  const auto r = msg.find("sample_rate");
  if (d == msg.end() || c == msg.end() || r == msg.end()) return 0.0;
  if (!d->is_array() || !c->is_array() || c->empty() || !r->is_number()) return 0.0;
  const double rate = r->get<double>();
  if (!(rate > 0.0)) return 0.0;
  return static_cast<double>(d->size()) / static_cast<double>(c->size()) / rate;
}

struct Item {
  std::optional<json> msg;
  std::string error;
  std::size_t offset = 0;
  std::int64_t received_us = 0;
  double seconds = 0.0;
  bool too_long = false;
};

}  // namespace

std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind) {
  std::string host = "127.0.0.1";
  std::string port = bind;
  const auto colon = bind.rfind(':');
  if (colon != std::string::npos) {
    if (colon > 0) host = bind.substr(0, colon);
    port = bind.substr(colon + 1);
  }
  if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigurationError("bad bind address: " + bind);
  }
  const int p = std::stoi(port);
  if (p > 65535) throw ConfigurationError("port out of range: " + bind);
  return {host, static_cast<std::uint16_t>(p)};
}

struct Server::Connection {
  explicit Connection(int f) : fd(f) {}
  int fd;
  std::thread thread;
  std::atomic<bool> done{false};
  std::atomic<bool> closing{false};
  std::atomic<std::int64_t> close_at{0};
  std::mutex send_mu;
  std::mutex state_mu;
  std::string session_id;
  double queued_s = 0.0;
  bool lagging = false;

  void send(const json& msg) {
    std::lock_guard lock(send_mu);
    send_all(fd, dump_line(msg) + "\n");
  }
  void begin_close() {
    if (closing.exchange(true)) return;
    close_at = monotonic_micros();
    ::shutdown(fd, SHUT_WR);
  }
};

Server::Server(ServerOptions options) : opts_(std::move(options)) {}

Server::~Server() { stop(); }

void Server::start() {
  if (running_) return;
  opts_.defaults = resolve(opts_.defaults);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* res = nullptr;
  const auto service = std::to_string(opts_.port);
  if (int rc = ::getaddrinfo(opts_.host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw ConfigurationError("cannot resolve " + opts_.host + ": " + ::gai_strerror(rc));
  }
  std::string err = "no usable address";
  for (auto* a = res; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    err = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (listen_fd_ < 0) throw ConfigurationError("cannot listen on " + opts_.host + ":" + service + ": " + err);

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                           : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  {
    std::lock_guard lock(conns_mu_);
    for (auto& c : conns_) ::shutdown(c->fd, SHUT_RDWR);
  }
  reap(true);
}

std::size_t Server::connections_open() const {
  std::lock_guard lock(conns_mu_);
  std::size_t n = 0;
  for (const auto& c : conns_) n += c->done ? 0 : 1;
  return n;
}

void Server::reap(bool all) {
  std::list<std::unique_ptr<Connection>> finished;
  {
    std::lock_guard lock(conns_mu_);
    for (auto it = conns_.begin(); it != conns_.end();) {
      if (all || (*it)->done) {
        finished.push_back(std::move(*it));
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : finished) {
    if (c->thread.joinable()) c->thread.join();
  }
}

void Server::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, kPollMs);
    reap(false);
    if (rc <= 0 || !(p.revents & POLLIN)) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto conn = std::make_unique<Connection>(fd);
    auto* raw = conn.get();
    {
      std::lock_guard lock(conns_mu_);
      conns_.push_back(std::move(conn));
    }
    ++accepted_;
    raw->thread = std::thread([this, raw] { serve_connection(*raw); });
  }
}

void Server::serve_connection(Connection& c) {
  Session session(opts_.defaults, opts_.log_dir, default_session_id());
  util::BoundedQueue<Item> queue(opts_.queue_capacity);

  std::thread worker([&] {
    while (auto item = queue.pop()) {
      {
        std::lock_guard lock(c.state_mu);
        c.queued_s -= item->seconds;
        if (c.queued_s < 0.5 * opts_.lag_seconds) c.lagging = false;
      }
      if (c.closing) continue;
      if (item->too_long) {
        c.send(error_message("line_too_long", item->error, session.started() ? session.id() : ""));
        c.begin_close();
        continue;
      }
      Outgoing out = item->msg ? session.handle(*item->msg, item->received_us)
                               : session.malformed(item->error, item->offset);
      if (session.started()) {
        std::lock_guard lock(c.state_mu);
        c.session_id = session.id();
      }
      for (const auto& m : out.messages) c.send(m);
      if (out.close) c.begin_close();
    }
    session.finish();
  });

  auto handle_line = [&](std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    Item item;
    item.received_us = monotonic_micros();
    try {
      item.msg = json::parse(line);
    } catch (const json::parse_error& e) {
      item.error = e.what();
      item.offset = e.byte > 0 ? e.byte - 1 : 0;
    }
    if (item.msg) {
      item.seconds = eeg_seconds(*item.msg);
      std::optional<json> lag;
      {
        std::lock_guard lock(c.state_mu);
        c.queued_s += item.seconds;
        if (c.queued_s > opts_.lag_seconds && !c.lagging) {
          c.lagging = true;
          lag = json{{"type", "event"}, {"name", "lag"}, {"queued_s", c.queued_s}};
          if (!c.session_id.empty()) (*lag)["session_id"] = c.session_id;
        }
      }
      if (lag) c.send(*lag);
    }
    queue.push(std::move(item));
  };

  std::string buf;
  std::vector<char> tmp(1 << 16);
  while (running_) {
    if (c.closing && monotonic_micros() - c.close_at > kLingerMicros) break;
    pollfd p{c.fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, kPollMs);
    if (rc < 0 && errno != EINTR) break;
    if (rc <= 0) continue;
    const auto n = ::recv(c.fd, tmp.data(), tmp.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    if (c.closing) continue;  // draining until the peer hangs up
    buf.append(tmp.data(), static_cast<std::size_t>(n));
    std::size_t start = 0;
    bool too_long = false;
    for (auto nl = buf.find('\n', start); nl != std::string::npos && !too_long; nl = buf.find('\n', start)) {
      too_long = nl - start > opts_.max_line_bytes;
      if (!too_long) handle_line(std::string_view(buf).substr(start, nl - start));
      start = nl + 1;
    }
    buf.erase(0, std::min(start, buf.size()));
    if (too_long || buf.size() > opts_.max_line_bytes) {
      // queued messages are answered first, then the connection closes
      Item stop;
      stop.error = "line exceeds " + std::to_string(opts_.max_line_bytes) + " bytes";
      stop.too_long = true;
      queue.push(std::move(stop));
      buf.clear();
    }
  }
  queue.close();
  worker.join();
  ::close(c.fd);
  c.done = true;
}

LineClient::LineClient(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_NUMERICSERV;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw ConfigurationError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  for (auto* a = res; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw ConfigurationError("cannot connect to " + host + ":" + service);
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

LineClient::~LineClient() { close(); }

void LineClient::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

bool LineClient::send_line(const std::string& line) { return fd_ >= 0 && send_all(fd_, line + "\n"); }

bool LineClient::send(const json& msg) { return send_line(dump_line(msg)); }

std::optional<std::string> LineClient::read_line(int timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
      std::string line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      return line;
    }
    if (eof_ || fd_ < 0) return std::nullopt;
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
    if (left <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(left));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) return std::nullopt;
    char tmp[65536];
    const auto n = ::recv(fd_, tmp, sizeof tmp, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      eof_ = true;
      continue;
    }
    buf_.append(tmp, static_cast<std::size_t>(n));
  }
}

std::optional<json> LineClient::read_json(int timeout_ms) {
  auto line = read_line(timeout_ms);
  if (!line) return std::nullopt;
  return json::parse(*line);
}

bool LineClient::wait_closed(int timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (!eof_ && std::chrono::steady_clock::now() < deadline) {
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
    if (!read_line(static_cast<int>(std::max<long>(left, 1)))) {
      if (!eof_) return false;
    }
  }
  return eof_;
}

}  // namespace neuroloop::bridge
