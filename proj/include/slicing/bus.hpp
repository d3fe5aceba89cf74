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

// Ordered topic-based publish/subscribe. Every topic is a retained log;
// publishing assigns the next per-topic sequence number, and consumers pull by
// offset, so each subscriber sees each envelope once and in order.

#ifndef SLICING_BUS_HPP_
#define SLICING_BUS_HPP_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace slicing {

struct ObservationBody {
  double norm_traffic = 0.0;
  double cpu_gap = 0.0;
  friend bool operator==(const ObservationBody&, const ObservationBody&) = default;
};

struct MessageBody {
  int symbol = 0;
  friend bool operator==(const MessageBody&, const MessageBody&) = default;
};

struct ActionBody {
  int action_index = 0;
  int message_index = 0;
  double allocation = 0.0;
  friend bool operator==(const ActionBody&, const ActionBody&) = default;
};

struct RewardBody {
  double reward = 0.0;
  bool conflict = false;
  bool violator = false;
  friend bool operator==(const RewardBody&, const RewardBody&) = default;
};

using Labels = std::vector<std::pair<std::string, std::string>>;

struct MetricBody {
  std::string name;
  Labels labels;
  double value = 0.0;
  std::int64_t index = 0;
  friend bool operator==(const MetricBody&, const MetricBody&) = default;
};

using Payload = std::variant<ObservationBody, MessageBody, ActionBody, RewardBody, MetricBody>;

// Wire kind tag for each payload alternative.
const char* payload_kind(const Payload& p);

struct Envelope {
  std::string topic;
  std::uint64_t seq = 0;
  std::string sender;
  std::int64_t step = 0;
  Payload payload;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

struct TopicLayout {
  static std::string obs_topic(int k) { return "obs." + std::to_string(k); }
  static std::string msg_broadcast_topic() { return "msg.broadcast"; }
  static std::string action_topic(int k) { return "action." + std::to_string(k); }
  static std::string reward_topic(int k) { return "reward." + std::to_string(k); }
  static std::string metrics_topic() { return "metrics"; }
  static std::vector<std::string> all(int num_slices);
};

inline std::string server_id() { return "server"; }
inline std::string agent_id(int k) { return "agent-" + std::to_string(k); }

inline constexpr std::size_t kDefaultMaxRecordBytes = 64 * 1024;

class Bus {
 public:
  virtual ~Bus() = default;

  virtual void declare(const std::string& topic) = 0;
  virtual bool has_topic(const std::string& topic) const = 0;
  // Appends to the topic log (creating the topic if needed) and returns the
  // assigned sequence number. Throws ValidationError when the encoded record
  // exceeds the size limit.
  virtual std::uint64_t publish(Envelope envelope) = 0;
  // Envelopes with seq >= from_seq, in order, at most `max`. Blocks up to
  // `wait` for the first one when none is available yet. Throws
  // ValidationError for an unknown topic.
  virtual std::vector<Envelope> fetch(const std::string& topic, std::uint64_t from_seq,
                                      std::size_t max = std::numeric_limits<std::size_t>::max(),
                                      std::chrono::milliseconds wait = std::chrono::milliseconds(0)) = 0;
  // Records that `subscriber` reads `topic` (for access audits).
  virtual void register_subscriber(const std::string& topic, const std::string& subscriber) = 0;
  virtual std::set<std::string> subscribers(const std::string& topic) const = 0;
};

// In-process bus; safe for concurrent publishers and consumers.
class InProcBus : public Bus {
 public:
  explicit InProcBus(std::size_t max_record_bytes = kDefaultMaxRecordBytes)
      : max_record_bytes_(max_record_bytes) {}

  void declare(const std::string& topic) override;
  bool has_topic(const std::string& topic) const override;
  std::uint64_t publish(Envelope envelope) override;
  std::vector<Envelope> fetch(const std::string& topic, std::uint64_t from_seq,
                              std::size_t max = std::numeric_limits<std::size_t>::max(),
                              std::chrono::milliseconds wait = std::chrono::milliseconds(0)) override;
  void register_subscriber(const std::string& topic, const std::string& subscriber) override;
  std::set<std::string> subscribers(const std::string& topic) const override;

  std::vector<std::string> topics() const;
  std::size_t topic_size(const std::string& topic) const;
  // Drops every retained envelope but keeps topics and subscribers; sequence
  // numbers keep counting.
  void truncate_all();

 private:
  struct Topic {
    std::uint64_t base = 0;   // seq of logs.front()
    std::vector<Envelope> log;
    std::set<std::string> subscribers;
  };

  std::size_t max_record_bytes_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, Topic> topics_;
};

// Cursor over one topic; `poll` returns each envelope exactly once.
class Subscription {
 public:
  Subscription(Bus& bus, std::string topic, std::uint64_t from_seq, std::string subscriber);

  std::vector<Envelope> poll(std::chrono::milliseconds wait = std::chrono::milliseconds(0));
  std::uint64_t next_seq() const { return next_; }
  const std::string& topic() const { return topic_; }

 private:
  Bus* bus_;
  std::string topic_;
  std::uint64_t next_;
};

// Throws ValidationError for an unknown topic.
Subscription subscribe(Bus& bus, const std::string& topic, std::uint64_t from_seq,
                       const std::string& subscriber);

}  // namespace slicing

#endif  // SLICING_BUS_HPP_
