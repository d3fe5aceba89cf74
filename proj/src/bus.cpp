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

#include "slicing/bus.hpp"

#include <algorithm>

#include "slicing/error.hpp"
#include "slicing/wire.hpp"

namespace slicing {

const char* payload_kind(const Payload& p) {
  switch (p.index()) {
    case 0: return "obs";
    case 1: return "msg";
    case 2: return "action";
    case 3: return "reward";
    default: return "metric";
  }
}

std::vector<std::string> TopicLayout::all(int num_slices) {
  std::vector<std::string> out;
  for (int k = 0; k < num_slices; ++k) {
    out.push_back(obs_topic(k));
    out.push_back(action_topic(k));
    out.push_back(reward_topic(k));
  }
  out.push_back(msg_broadcast_topic());
  out.push_back(metrics_topic());
  return out;
}

void InProcBus::declare(const std::string& topic) {
  if (topic.empty()) throw ValidationError("topic name must not be empty");
  std::lock_guard<std::mutex> lock(mu_);
  topics_.try_emplace(topic);
}

bool InProcBus::has_topic(const std::string& topic) const {
  std::lock_guard<std::mutex> lock(mu_);
  return topics_.count(topic) != 0;
}

std::uint64_t InProcBus::publish(Envelope envelope) {
  if (envelope.topic.empty()) throw ValidationError("topic name must not be empty");
  if (envelope.step < 0) throw ValidationError("envelope step must be >= 0");
  std::uint64_t seq = 0;
  {
    std::lock_guard<std::mutex> lock(mu_);
    Topic& t = topics_[envelope.topic];
    seq = t.base + t.log.size();
    envelope.seq = seq;
    // Size is checked on the final record so the limit matches what goes on
    // the wire.
    const std::size_t bytes = encode_wire(envelope).size();
    if (bytes > max_record_bytes_) {
      throw ValidationError("record of " + std::to_string(bytes) + " bytes exceeds limit of " +
                            std::to_string(max_record_bytes_));
    }
    t.log.push_back(std::move(envelope));
  }
  cv_.notify_all();
  return seq;
}

std::vector<Envelope> InProcBus::fetch(const std::string& topic, std::uint64_t from_seq,
                                       std::size_t max, std::chrono::milliseconds wait) {
  std::unique_lock<std::mutex> lock(mu_);
  auto it = topics_.find(topic);
  if (it == topics_.end()) throw ValidationError("unknown topic '" + topic + "'");
  const Topic& t = it->second;
  auto end_seq = [&t] { return t.base + t.log.size(); };
  if (wait.count() > 0 && end_seq() <= from_seq) {
    cv_.wait_for(lock, wait, [&] { return end_seq() > from_seq; });
  }
  std::vector<Envelope> out;
  std::uint64_t s = std::max(from_seq, t.base);
  for (; s < end_seq() && out.size() < max; ++s) out.push_back(t.log[s - t.base]);
  return out;
}

void InProcBus::register_subscriber(const std::string& topic, const std::string& subscriber) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = topics_.find(topic);
  if (it == topics_.end()) throw ValidationError("unknown topic '" + topic + "'");
  it->second.subscribers.insert(subscriber);
}

std::set<std::string> InProcBus::subscribers(const std::string& topic) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = topics_.find(topic);
  if (it == topics_.end()) return {};
  return it->second.subscribers;
}

std::vector<std::string> InProcBus::topics() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, t] : topics_) out.push_back(name);
  return out;
}

std::size_t InProcBus::topic_size(const std::string& topic) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = topics_.find(topic);
  return it == topics_.end() ? 0 : it->second.log.size();
}

void InProcBus::truncate_all() {
  std::lock_guard<std::mutex> lock(mu_);
  for (auto& [name, t] : topics_) {
    t.base += t.log.size();
    t.log.clear();
  }
}

Subscription::Subscription(Bus& bus, std::string topic, std::uint64_t from_seq,
                           std::string subscriber)
    : bus_(&bus), topic_(std::move(topic)), next_(from_seq) {
  bus.register_subscriber(topic_, subscriber);
}

std::vector<Envelope> Subscription::poll(std::chrono::milliseconds wait) {
  auto out = bus_->fetch(topic_, next_, std::numeric_limits<std::size_t>::max(), wait);
  if (!out.empty()) next_ = out.back().seq + 1;
  return out;
}

Subscription subscribe(Bus& bus, const std::string& topic, std::uint64_t from_seq,
                       const std::string& subscriber) {
  if (!bus.has_topic(topic)) throw ValidationError("unknown topic '" + topic + "'");
  return Subscription(bus, topic, from_seq, subscriber);
}

}  // namespace slicing
