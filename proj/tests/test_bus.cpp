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

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <random>
#include <thread>

#include "slicing/bus.hpp"
#include "slicing/error.hpp"
#include "slicing/socket_bus.hpp"
#include "slicing/wire.hpp"
#include "support/fuzz.hpp"

using namespace slicing;
using namespace std::chrono_literals;

namespace {

Envelope msg(const std::string& topic, int symbol, std::int64_t step = 0) {
  return Envelope{topic, 0, "agent-0", step, MessageBody{symbol}};
}

}  // namespace

TEST_CASE("publish assigns per-topic sequence numbers from zero") {
  InProcBus bus;
  CHECK(bus.publish(msg("a", 1)) == 0);
  CHECK(bus.publish(msg("a", 2)) == 1);
  CHECK(bus.publish(msg("b", 3)) == 0);
  CHECK(bus.topic_size("a") == 2);
  const auto got = bus.fetch("a", 0);
  REQUIRE(got.size() == 2);
  CHECK(got[0].seq == 0);
  CHECK(got[1].seq == 1);
}

TEST_CASE("publish validation") {
  InProcBus bus(256);
  CHECK_THROWS_AS(bus.publish(msg("", 1)), ValidationError);
  CHECK_THROWS_AS(bus.publish(msg("a", 1, -1)), ValidationError);
  MetricBody big;
  big.name = std::string(400, 'x');
  CHECK_THROWS_AS(bus.publish(Envelope{"m", 0, "s", 0, big}), ValidationError);
  CHECK_THROWS_AS(bus.fetch("nope", 0), ValidationError);
}

TEST_CASE("concurrent producers yield a gap-free range") {
  InProcBus bus;
  bus.declare("t");
  const int threads = 8, per = 1250;
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i)
    pool.emplace_back([&bus, i] {
      for (int j = 0; j < per; ++j) bus.publish(msg("t", i));
    });
  for (auto& t : pool) t.join();
  const auto all = bus.fetch("t", 0);
  REQUIRE(all.size() == std::size_t(threads * per));
  for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i].seq == i);
}

TEST_CASE("subscriptions") {
  InProcBus bus;
  bus.declare("x");
  for (int i = 0; i < 3; ++i) bus.publish(msg("x", i));
  Subscription all = subscribe(bus, "x", 0, "reader");
  auto got = all.poll();
  REQUIRE(got.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::get<MessageBody>(got[i].payload).symbol == i);
  CHECK(all.poll().empty());
  bus.publish(msg("x", 9));
  CHECK(all.poll().size() == 1);

  Subscription suffix = subscribe(bus, "x", 2, "late");
  got = suffix.poll();
  REQUIRE(got.size() == 2);
  CHECK(got[0].seq == 2);
  CHECK(bus.subscribers("x") == std::set<std::string>{"late", "reader"});
  CHECK_THROWS_AS(subscribe(bus, "unknown", 0, "r"), ValidationError);
}

TEST_CASE("poll waits for a late publish") {
  InProcBus bus;
  bus.declare("w");
  Subscription s = subscribe(bus, "w", 0, "r");
  std::thread producer([&bus] {
    std::this_thread::sleep_for(20ms);
    bus.publish(msg("w", 4));
  });
  const auto got = s.poll(2000ms);
  producer.join();
  REQUIRE(got.size() == 1);
  CHECK(std::get<MessageBody>(got[0].payload).symbol == 4);
}

TEST_CASE("truncation keeps sequence numbers counting") {
  InProcBus bus;
  bus.publish(msg("t", 0));
  bus.publish(msg("t", 1));
  bus.truncate_all();
  CHECK(bus.topic_size("t") == 0);
  CHECK(bus.publish(msg("t", 2)) == 2);
  const auto got = bus.fetch("t", 0);
  REQUIRE(got.size() == 1);
  CHECK(got[0].seq == 2);
}

TEST_CASE("interleaved publish and poll keep per-topic order") {
  InProcBus bus;
  std::mt19937_64 g(71);
  const std::vector<std::string> topics{"a", "b", "c"};
  for (const auto& t : topics) bus.declare(t);
  std::vector<Subscription> subs, subs2;
  for (const auto& t : topics) {
    subs.push_back(subscribe(bus, t, 0, "r1"));
    subs2.push_back(subscribe(bus, t, 0, "r2"));
  }
  std::vector<int> sent(3, 0);
  std::vector<std::vector<int>> seen(3), seen2(3);
  for (int i = 0; i < 20'000; ++i) {
    const std::size_t k = g() % 3;
    if (g() % 3 != 0) {
      bus.publish(msg(topics[k], sent[k]++));
    } else {
      auto& s = (g() & 1) ? subs[k] : subs2[k];
      auto& dst = (&s == &subs[k]) ? seen[k] : seen2[k];
      for (const auto& e : s.poll()) dst.push_back(std::get<MessageBody>(e.payload).symbol);
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    for (const auto& e : subs[k].poll()) seen[k].push_back(std::get<MessageBody>(e.payload).symbol);
    for (const auto& e : subs2[k].poll()) seen2[k].push_back(std::get<MessageBody>(e.payload).symbol);
    REQUIRE(seen[k].size() == std::size_t(sent[k]));
    CHECK(seen[k] == seen2[k]);
    for (int i = 0; i < sent[k]; ++i) REQUIRE(seen[k][i] == i);
  }
}

TEST_CASE("wire round trip") {
  std::mt19937_64 g(2024);
  for (int i = 0; i < 10'000; ++i) {
    const Envelope e = fuzz::envelope(g);
    const std::string rec = encode_wire(e);
    REQUIRE(rec.back() == '\n');
    REQUIRE(std::count(rec.begin(), rec.end(), '\n') == 1);
    const Envelope back = decode_wire(rec);
    REQUIRE(back == e);
  }
}

TEST_CASE("wire format details") {
  const Envelope e{"obs.1", 4, "server", 12, ObservationBody{0.5, -2.25}};
  CHECK(encode_wire(e) == "obs.1|4|server|12|obs|traffic=0.5;gap=-2.25\n");

  const Envelope empty = decode_wire("msg.broadcast|0|agent-1|0|msg|");
  CHECK(std::get<MessageBody>(empty.payload).symbol == 0);

  SUBCASE("missing field reports an offset") {
    try {
      decode_wire("obs.0|0|server|3|obs");
      FAIL("expected ParseError");
    } catch (const ParseError& err) {
      CHECK(err.offset() > 0);
      CHECK(std::string(err.what()).find("6 fields") != std::string::npos);
    }
  }
  SUBCASE("bad integer points at its field") {
    try {
      decode_wire("obs.0|x1|server|3|obs|");
      FAIL("expected ParseError");
    } catch (const ParseError& err) {
      CHECK(err.offset() == 7);
    }
  }
  SUBCASE("other malformed records") {
    CHECK_THROWS_AS(decode_wire("t|0|s|0|bogus|"), ParseError);
    CHECK_THROWS_AS(decode_wire("t|0|s|-1|msg|"), ParseError);
    CHECK_THROWS_AS(decode_wire("t|0|s|0|msg|symbol=1;symbol=2"), ParseError);
    CHECK_THROWS_AS(decode_wire("t|0|s|0|msg|colour=1"), ParseError);
    CHECK_THROWS_AS(decode_wire("t|0|s|0|reward|conflict=2"), ParseError);
    CHECK_THROWS_AS(decode_wire("t%4|0|s|0|msg|"), ParseError);
    CHECK_THROWS_AS(decode_wire("|0|s|0|msg|"), ParseError);
  }
  SUBCASE("stream errors carry the line") {
    try {
      decode_wire_stream("a|0|s|0|msg|symbol=1\nb|0|s|0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& err) {
      CHECK(err.line() == 2);
    }
  }
  CHECK(escape_field("a|b;c=d%\n") == "a%7Cb%3Bc%3Dd%25%0A");
  CHECK(unescape_field("a%7Cb%3bc") == "a|b;c");
}

TEST_CASE("socket transport") {
  InProcBus backing;
  BusServer server(backing, parse_socket_address("127.0.0.1:0"));
  REQUIRE(server.port() > 0);
  SocketAddress addr{"127.0.0.1", server.port()};
  SocketBusClient a(addr), b(addr);

  a.declare("topic with space");
  CHECK(b.has_topic("topic with space"));
  CHECK_FALSE(b.has_topic("missing"));
  CHECK(a.publish(msg("topic with space", 5)) == 0);
  CHECK(b.publish(msg("topic with space", 6)) == 1);
  const auto got = b.fetch("topic with space", 0);
  REQUIRE(got.size() == 2);
  CHECK(std::get<MessageBody>(got[1].payload).symbol == 6);
  CHECK(backing.topic_size("topic with space") == 2);
  CHECK(b.fetch("topic with space", 1, 1).size() == 1);

  a.register_subscriber("topic with space", "agent-0");
  CHECK(b.subscribers("topic with space") == std::set<std::string>{"agent-0"});
  CHECK_THROWS_AS(a.fetch("missing", 0), ValidationError);
  CHECK_THROWS_AS(a.publish(msg("", 1)), ValidationError);

  SUBCASE("blocking fetch across connections") {
    std::thread producer([&] {
      std::this_thread::sleep_for(30ms);
      a.publish(msg("topic with space", 7));
    });
    const auto late = b.fetch("topic with space", 2, 10, 3000ms);
    producer.join();
    REQUIRE(late.size() == 1);
    CHECK(std::get<MessageBody>(late[0].payload).symbol == 7);
  }
  server.stop();
}

TEST_CASE("silent peer raises an orchestration fault") {
  // A listening socket that never accepts: connect succeeds, replies never come.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  sa.sin_port = 0;
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0);
  REQUIRE(::listen(fd, 4) == 0);
  socklen_t len = sizeof sa;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  SocketBusClient c({"127.0.0.1", ntohs(sa.sin_port)}, 150ms);
  CHECK_THROWS_AS(c.has_topic("x"), OrchestrationFault);
  ::close(fd);
}

TEST_CASE("socket addresses") {
  const SocketAddress a = parse_socket_address("10.0.0.1:8080");
  CHECK(a.host == "10.0.0.1");
  CHECK(a.port == 8080);
  CHECK(parse_socket_address(":9").port == 9);
  CHECK_THROWS_AS(parse_socket_address("nohost"), ValidationError);
  CHECK_THROWS_AS(parse_socket_address("h:99999"), ValidationError);
  CHECK_THROWS_AS(parse_socket_address("h:x"), ValidationError);
}
