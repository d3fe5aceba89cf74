// Copyright 2026 The Agentic Slicing Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "slicing/socket_bus.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

#include "slicing/error.hpp"
#include "slicing/format.hpp"
#include "slicing/wire.hpp"

namespace slicing {
namespace {

std::string sys_error(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(sys_error("socket send"));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

// false on EOF before any byte when `eof_ok`.
bool read_all(int fd, char* data, std::size_t n, bool eof_ok) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, data + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(sys_error("socket recv"));
    }
    if (r == 0) {
      if (got == 0 && eof_ok) return false;
      throw Error("socket closed mid-frame");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

std::string ok_reply(std::uint64_t n, const std::string& body = {}) {
  return "OK " + std::to_string(n) + "\n" + body;
}

std::string err_reply(const std::exception& e) {
  const char* cls = "E";
  if (dynamic_cast<const ValidationError*>(&e)) cls = "V";
  else if (dynamic_cast<const ParseError*>(&e)) cls = "P";
  else if (dynamic_cast<const ContractViolation*>(&e)) cls = "C";
  return std::string("ERR ") + cls + " " + e.what();
}

std::vector<std::string> tokens(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::uint64_t to_u64(const std::string& s) {
  auto v = parse_integer<std::uint64_t>(s);
  if (!v) throw ParseError("bad integer '" + s + "' in bus request");
  return *v;
}

}  // namespace

SocketAddress parse_socket_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw ValidationError("address '" + text + "' must be host:port");
  SocketAddress a;
  if (colon > 0) a.host = text.substr(0, colon);
  auto port = parse_integer<int>(std::string_view(text).substr(colon + 1));
  if (!port || *port < 0 || *port > 65535)
    throw ValidationError("address '" + text + "' has an invalid port");
  a.port = *port;
  return a;
}

void write_frame(int fd, std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw ValidationError("frame exceeds size limit");
  const auto n = static_cast<std::uint32_t>(payload.size());
  const unsigned char len[4] = {static_cast<unsigned char>(n >> 24), static_cast<unsigned char>(n >> 16),
                                static_cast<unsigned char>(n >> 8), static_cast<unsigned char>(n)};
  std::string buf(reinterpret_cast<const char*>(len), 4);
  buf.append(payload);
  write_all(fd, buf.data(), buf.size());
}

std::optional<std::string> read_frame(int fd) {
  unsigned char len[4];
  if (!read_all(fd, reinterpret_cast<char*>(len), 4, true)) return std::nullopt;
  const std::uint32_t n = (std::uint32_t{len[0]} << 24) | (std::uint32_t{len[1]} << 16) |
                          (std::uint32_t{len[2]} << 8) | std::uint32_t{len[3]};
  if (n > kMaxFrameBytes) throw ValidationError("incoming frame exceeds size limit");
  std::string payload(n, '\0');
  if (n > 0) read_all(fd, payload.data(), n, false);
  return payload;
}

BusServer::BusServer(InProcBus& bus, const SocketAddress& address) : bus_(bus) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(sys_error("socket"));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(address.port));
  if (::inet_pton(AF_INET, address.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw ValidationError("listen host '" + address.host + "' is not an IPv4 address");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listen_fd_, 64) < 0) {
    const std::string msg = sys_error("bind/listen");
    ::close(listen_fd_);
    throw Error(msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

BusServer::~BusServer() { stop(); }

void BusServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard<std::mutex> lock(conn_mu_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& w : workers_)
    if (w.joinable()) w.join();
  for (int fd : conn_fds_) ::close(fd);
}

void BusServer::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, 100);
    if (r <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard<std::mutex> lock(conn_mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    conn_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void BusServer::serve(int fd) {
  try {
    while (!stopping_) {
      auto frame = read_frame(fd);
      if (!frame) return;
      const std::string& req = *frame;
      const auto nl = req.find('\n');
      const std::string verb = req.substr(0, nl);
      const std::string_view rest =
          nl == std::string::npos ? std::string_view{} : std::string_view(req).substr(nl + 1);
      std::string reply;
      try {
        if (verb == "D") {
          bus_.declare(unescape_field(rest));
          reply = ok_reply(0);
        } else if (verb == "H") {
          reply = ok_reply(bus_.has_topic(unescape_field(rest)) ? 1 : 0);
        } else if (verb == "P") {
          reply = ok_reply(bus_.publish(decode_wire(rest)));
        } else if (verb == "F") {
          const auto lines = split_lines(rest);
          const auto t = tokens(lines.size() == 2 ? lines[0] : std::string_view{});
          if (t.size() != 3) throw ParseError("fetch needs 3 numbers and a topic");
          const auto max = to_u64(t[1]);
          auto out = bus_.fetch(unescape_field(lines[1]), to_u64(t[0]),
                                max == 0 ? std::numeric_limits<std::size_t>::max() : max,
                                std::chrono::milliseconds(to_u64(t[2])));
          std::string body;
          for (const auto& e : out) body += encode_wire(e);
          reply = ok_reply(out.size(), body);
        } else if (verb == "S") {
          const auto lines = split_lines(rest);
          if (lines.size() != 2) throw ParseError("subscribe needs a topic and a subscriber");
          bus_.register_subscriber(unescape_field(lines[0]), unescape_field(lines[1]));
          reply = ok_reply(0);
        } else if (verb == "L") {
          std::string body;
          const auto subs = bus_.subscribers(unescape_field(rest));
          for (const auto& s : subs) body += escape_field(s) + "\n";
          reply = ok_reply(subs.size(), body);
        } else {
          throw ParseError("unknown bus verb '" + verb + "'");
        }
      } catch (const std::exception& e) {
        reply = err_reply(e);
      }
      write_frame(fd, reply);
    }
  } catch (const std::exception&) {
    // Connection dropped; the client sees the failure on its side.
  }
}

SocketBusClient::SocketBusClient(const SocketAddress& address, std::chrono::milliseconds io_timeout)
    : io_timeout_(io_timeout) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error(sys_error("socket"));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(address.port));
  if (::inet_pton(AF_INET, address.host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ValidationError("host '" + address.host + "' is not an IPv4 address");
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string msg = sys_error("connect");
    ::close(fd_);
    throw Error(msg);
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

SocketBusClient::~SocketBusClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string SocketBusClient::call(const std::string& request, std::chrono::milliseconds extra,
                                  std::uint64_t* n) const {
  std::lock_guard<std::mutex> lock(mu_);
  write_frame(fd_, request);
  pollfd p{fd_, POLLIN, 0};
  const auto budget = io_timeout_ + extra;
  if (::poll(&p, 1, static_cast<int>(budget.count())) <= 0)
    throw OrchestrationFault("bus reply timed out after " + std::to_string(budget.count()) + " ms");
  auto reply = read_frame(fd_);
  if (!reply) throw OrchestrationFault("bus server closed the connection");
  const std::string& r = *reply;
  if (r.rfind("ERR ", 0) == 0) {
    const char cls = r.size() > 4 ? r[4] : 'E';
    const std::string msg = r.size() > 6 ? r.substr(6) : "bus error";
    switch (cls) {
      case 'V': throw ValidationError(msg);
      case 'P': throw ParseError(msg);
      case 'C': throw ContractViolation(msg);
      default: throw Error(msg);
    }
  }
  const auto nl = r.find('\n');
  if (r.rfind("OK ", 0) != 0 || nl == std::string::npos) throw Error("malformed bus reply");
  auto count = parse_integer<std::uint64_t>(std::string_view(r).substr(3, nl - 3));
  if (!count) throw Error("malformed bus reply");
  if (n) *n = *count;
  return r.substr(nl + 1);
}

void SocketBusClient::declare(const std::string& topic) {
  call("D\n" + escape_field(topic), {}, nullptr);
}

bool SocketBusClient::has_topic(const std::string& topic) const {
  std::uint64_t n = 0;
  call("H\n" + escape_field(topic), {}, &n);
  return n != 0;
}

std::uint64_t SocketBusClient::publish(Envelope envelope) {
  if (envelope.topic.empty()) throw ValidationError("topic name must not be empty");
  if (envelope.step < 0) throw ValidationError("envelope step must be >= 0");
  std::uint64_t seq = 0;
  call("P\n" + encode_wire(envelope), {}, &seq);
  return seq;
}

std::vector<Envelope> SocketBusClient::fetch(const std::string& topic, std::uint64_t from_seq,
                                             std::size_t max, std::chrono::milliseconds wait) {
  const std::uint64_t wire_max = max == std::numeric_limits<std::size_t>::max() ? 0 : max;
  const std::string req = "F\n" + std::to_string(from_seq) + " " + std::to_string(wire_max) + " " +
                          std::to_string(wait.count()) + "\n" + escape_field(topic);
  return decode_wire_stream(call(req, wait, nullptr));
}

void SocketBusClient::register_subscriber(const std::string& topic, const std::string& subscriber) {
  call("S\n" + escape_field(topic) + "\n" + escape_field(subscriber), {}, nullptr);
}

std::set<std::string> SocketBusClient::subscribers(const std::string& topic) const {
  const std::string body = call("L\n" + escape_field(topic), {}, nullptr);
  std::set<std::string> out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.insert(unescape_field(line));
  return out;
}

}  // namespace slicing
