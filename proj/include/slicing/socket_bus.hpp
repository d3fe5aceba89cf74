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

// TCP transport for the bus. Each frame is a 4-byte big-endian length
// followed by that many bytes. A request frame starts with a one-letter verb
// and a newline:
//
//   D <topic>                          declare
//   H <topic>                          has_topic            -> OK 0|1
//   P <wire record>                    publish              -> OK <seq>
//   F <from> <max> <wait_ms>\n<topic>  fetch                -> OK <n>, records
//   S <topic>\n<subscriber>            register_subscriber
//   L <topic>                          subscribers          -> OK <n>, names
//
// Topic and subscriber tokens use the wire escaping. Replies are
// "OK <n>\n<body>" or "ERR <class> <message>".

#ifndef SLICING_SOCKET_BUS_HPP_
#define SLICING_SOCKET_BUS_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "slicing/bus.hpp"

namespace slicing {

inline constexpr std::size_t kMaxFrameBytes = 16u << 20;

struct SocketAddress {
  std::string host = "127.0.0.1";
  int port = 0;
};

// "host:port" or ":port"; port 0 asks the kernel for a free port. Throws
// ValidationError on bad syntax.
SocketAddress parse_socket_address(const std::string& text);

// Both throw Error on I/O failure; read_frame returns nullopt on a clean EOF
// before the first length byte.
void write_frame(int fd, std::string_view payload);
std::optional<std::string> read_frame(int fd);

// Serves an InProcBus to socket clients, one thread per connection.
class BusServer {
 public:
  BusServer(InProcBus& bus, const SocketAddress& address);
  ~BusServer();
  BusServer(const BusServer&) = delete;
  BusServer& operator=(const BusServer&) = delete;

  int port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve(int fd);

  InProcBus& bus_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::vector<int> conn_fds_;
  std::vector<std::thread> workers_;
};

// Bus client over one TCP connection. Calls are serialized. A reply that does
// not arrive within `io_timeout` (plus any fetch wait) raises
// OrchestrationFault.
class SocketBusClient : public Bus {
 public:
  SocketBusClient(const SocketAddress& address,
                  std::chrono::milliseconds io_timeout = std::chrono::milliseconds(5000));
  ~SocketBusClient() override;
  SocketBusClient(const SocketBusClient&) = delete;
  SocketBusClient& operator=(const SocketBusClient&) = delete;

  void declare(const std::string& topic) override;
  bool has_topic(const std::string& topic) const override;
  std::uint64_t publish(Envelope envelope) override;
  std::vector<Envelope> fetch(const std::string& topic, std::uint64_t from_seq,
                              std::size_t max = std::numeric_limits<std::size_t>::max(),
                              std::chrono::milliseconds wait = std::chrono::milliseconds(0)) override;
  void register_subscriber(const std::string& topic, const std::string& subscriber) override;
  std::set<std::string> subscribers(const std::string& topic) const override;

 private:
  // Returns the reply body after "OK <n>\n" and stores n.
  std::string call(const std::string& request, std::chrono::milliseconds extra,
                   std::uint64_t* n) const;

  int fd_ = -1;
  std::chrono::milliseconds io_timeout_;
  mutable std::mutex mu_;
};

}  // namespace slicing

#endif  // SLICING_SOCKET_BUS_HPP_
