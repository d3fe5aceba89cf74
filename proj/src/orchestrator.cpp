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

#include "slicing/orchestrator.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "slicing/error.hpp"
#include "slicing/format.hpp"
#include "slicing/socket_bus.hpp"
#include "slicing/wire.hpp"

namespace slicing {
namespace {

constexpr std::uint64_t kEpisodeStream = 0x6570;
constexpr std::uint64_t kEvalStream = 0x6576;
constexpr std::uint64_t kAgentStream = 0x6167;

const std::string kMetricsReader = "metrics-exporter";

MessageVector null_messages(int num_slices) {
  return MessageVector(static_cast<std::size_t>(std::max(num_slices - 1, 0)), 0);
}

int sender_slice(const std::string& sender) {
  const std::string prefix = "agent-";
  if (sender.rfind(prefix, 0) != 0) return -1;
  auto k = parse_integer<int>(std::string_view(sender).substr(prefix.size()));
  return k ? *k : -1;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const char* key, const char* what) { throw ConfigError(key, what); };
  if (episodes < 1) fail("run.episodes", "must be >= 1");
  if (steps < 1) fail("run.steps", "must be >= 1");
  if (seeds.empty()) fail("run.seeds", "must list at least one seed");
  if (final_window < 1) fail("run.final_window", "must be >= 1");
  if (step_timeout.count() < 1) fail("bus.step_timeout_ms", "must be >= 1");
}

RunConfig RunConfig::from_config(const KeyValueConfig& cfg) {
  RunConfig r;
  r.episodes = static_cast<int>(cfg.get_int("run.episodes", r.episodes));
  r.steps = static_cast<int>(cfg.get_int("run.steps", r.steps));
  if (cfg.has("run.seeds")) {
    r.seeds.clear();
    for (std::int64_t s : cfg.get_ints("run.seeds", {})) {
      if (s < 0) throw ConfigError("run.seeds", "seeds must be >= 0");
      r.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  const std::string variant = cfg.get_string("run.variant", to_string(r.variant));
  try {
    r.variant = parse_variant(variant);
  } catch (const Error& e) {
    throw ConfigError("run.variant", e.what());
  }
  r.final_window = static_cast<int>(cfg.get_int("run.final_window", r.final_window));
  const std::string mode = cfg.get_string("bus.mode", "inproc");
  if (mode == "inproc") r.bus_mode = BusMode::kInProc;
  else if (mode == "socket") r.bus_mode = BusMode::kSocket;
  else throw ConfigError("bus.mode", "expected inproc or socket, got '" + mode + "'");
  r.listen_addr = cfg.get_string("bus.listen_addr", r.listen_addr);
  try {
    parse_socket_address(r.listen_addr);
  } catch (const Error& e) {
    throw ConfigError("bus.listen_addr", e.what());
  }
  r.step_timeout = std::chrono::milliseconds(cfg.get_int("bus.step_timeout_ms", r.step_timeout.count()));
  r.metrics_addr = cfg.get_string("metrics.listen_addr", r.metrics_addr);
  if (!r.metrics_addr.empty()) {
    try {
      parse_socket_address(r.metrics_addr);
    } catch (const Error& e) {
      throw ConfigError("metrics.listen_addr", e.what());
    }
  }
  r.validate();
  return r;
}

double step_utilization(std::span<const SliceStepRow> rows) {
  double served = 0.0;
  double allocated = 0.0;
  for (const auto& r : rows) {
    served += r.action * std::min(r.utilization, 1.0);
    allocated += r.action;
  }
  return allocated > 0.0 ? served / allocated : 0.0;
}

void EpisodeRecord::finalize() {
  num_steps = static_cast<std::int64_t>(steps.size());
  conflicts = 0;
  double reward = 0.0, util = 0.0, lat = 0.0;
  std::size_t rows = 0;
  for (const auto& step : steps) {
    if (!step.empty() && step.front().conflict) ++conflicts;
    util += step_utilization(step);
    for (const auto& r : step) {
      reward += r.reward;
      lat += r.latency;
      ++rows;
    }
  }
  const double n = num_steps > 0 ? static_cast<double>(num_steps) : 1.0;
  const double m = rows > 0 ? static_cast<double>(rows) : 1.0;
  conflict_rate = static_cast<double>(conflicts) / n;
  mean_utilization = util / n;
  mean_reward = reward / m;
  mean_latency = lat / m;
}

void write_episode_csv_header(std::ostream& out) {
  out << "episode,step,slice,action,message,reward,conflict,latency,utilization\n";
}

void write_episode_csv_rows(std::ostream& out, const EpisodeRecord& record) {
  std::string buf;
  for (std::size_t t = 0; t < record.steps.size(); ++t) {
    for (const auto& r : record.steps[t]) {
      buf.clear();
      buf += std::to_string(record.episode) + ',' + std::to_string(t) + ',' + std::to_string(r.slice) +
             ',' + fmt(r.action) + ',' + std::to_string(r.message) + ',' + fmt(r.reward) + ',' +
             (r.conflict ? '1' : '0') + ',' + fmt(r.latency) + ',' + fmt(r.utilization) + '\n';
      out << buf;
    }
  }
}

std::vector<EpisodeRecord> parse_episode_csv(std::string_view text) {
  std::vector<EpisodeRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header = false;
  auto next_line = [&](std::string_view& line) {
    if (start >= text.size()) return false;
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    ++line_no;
    return true;
  };
  std::string_view line;
  while (next_line(line)) {
    if (!header) {
      if (line != "episode,step,slice,action,message,reward,conflict,latency,utilization")
        throw ParseError("episode CSV: unexpected header", line_no);
      header = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t s = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(s, i - s));
        s = i + 1;
      }
    }
    auto bad = [&](const std::string& what) -> ParseError {
      return ParseError("episode CSV line " + std::to_string(line_no) + ": " + what, line_no);
    };
    if (f.size() != 9) throw bad("expected 9 fields");
    const auto episode = parse_integer<int>(f[0]);
    const auto step = parse_integer<std::int64_t>(f[1]);
    const auto slice = parse_integer<int>(f[2]);
    const auto action = parse_real<double>(f[3]);
    const auto message = parse_integer<int>(f[4]);
    const auto reward = parse_real<double>(f[5]);
    const auto latency = parse_real<double>(f[7]);
    const auto util = parse_real<double>(f[8]);
    if (!episode || !step || !slice || !action || !message || !reward || !latency || !util ||
        (f[6] != "0" && f[6] != "1"))
      throw bad("malformed field");
    if (out.empty() || out.back().episode != *episode) {
      if (!out.empty() && *episode < out.back().episode) throw bad("episodes out of order");
      out.emplace_back();
      out.back().episode = *episode;
    }
    auto& steps = out.back().steps;
    if (*step == static_cast<std::int64_t>(steps.size())) steps.emplace_back();
    else if (*step != static_cast<std::int64_t>(steps.size()) - 1) throw bad("steps out of order");
    SliceStepRow r;
    r.slice = *slice;
    r.action = r.requested = *action;
    r.message = *message;
    r.reward = *reward;
    r.conflict = f[6] == "1";
    r.latency = *latency;
    r.utilization = *util;
    steps.back().push_back(r);
  }
  if (!header) throw ValidationError("episode CSV is empty");
  if (out.empty()) throw ValidationError("episode CSV has no rows");
  for (auto& e : out) e.finalize();
  return out;
}

Observation observe(const SliceEnvironment& env, std::size_t k) {
  const Scenario& sc = env.scenario();
  Observation o;
  o.norm_traffic = std::clamp(env.last_traffic_bps(k) / sc.traffic_normalizer(k), 0.0, kMaxNormTraffic);
  o.cpu_gap = sc.slices[k].f_th - env.last_allocation(k);
  return o;
}

// ---------------------------------------------------------------------------
// Agent side.

AgentEndpoint::AgentEndpoint(int slice, int num_slices, Variant variant, double f_th, Agent* agent)
    : slice_(slice), num_slices_(num_slices), variant_(variant), f_th_(f_th), agent_(agent) {
  if (is_learning(variant) && !agent) throw ContractViolation("learning variants need an agent");
  begin_episode();
}

void AgentEndpoint::attach(Bus& bus) {
  bus_ = &bus;
  const std::string me = agent_id(slice_);
  obs_in_.sub.emplace(subscribe(bus, TopicLayout::obs_topic(slice_), 0, me));
  reward_in_.sub.emplace(subscribe(bus, TopicLayout::reward_topic(slice_), 0, me));
  if (uses_messages(variant_)) msg_in_.sub.emplace(subscribe(bus, TopicLayout::msg_broadcast_topic(), 0, me));
}

void AgentEndpoint::begin_episode() {
  prev_recv_ = null_messages(num_slices_);
  recv_ = prev_recv_;
  obs_ = {};
  pending_.reset();
}

Envelope AgentEndpoint::take(Inbox& inbox, std::int64_t t, std::chrono::milliseconds wait) {
  const std::string me = agent_id(slice_);
  const auto deadline = std::chrono::steady_clock::now() + wait;
  while (true) {
    while (!inbox.buffer.empty()) {
      Envelope& e = inbox.buffer.front();
      if (e.step < t || e.sender == me) {
        inbox.buffer.pop_front();
        continue;
      }
      if (e.step > t)
        throw OrchestrationFault(me + ": step " + std::to_string(e.step) + " arrived while waiting for " +
                                 std::to_string(t));
      Envelope out = std::move(e);
      inbox.buffer.pop_front();
      return out;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    for (auto& e : inbox.sub->poll(std::max(left, std::chrono::milliseconds(0))))
      inbox.buffer.push_back(std::move(e));
    if (inbox.buffer.empty() && std::chrono::steady_clock::now() >= deadline)
      throw OrchestrationFault(me + ": nothing on " + inbox.sub->topic() + " for step " + std::to_string(t));
  }
}

void AgentEndpoint::publish_message(std::int64_t t, std::chrono::milliseconds wait) {
  if (!bus_) throw ContractViolation("endpoint is not attached to a bus");
  const Envelope e = take(obs_in_, t, wait);
  const auto* body = std::get_if<ObservationBody>(&e.payload);
  if (!body) throw OrchestrationFault(agent_id(slice_) + ": observation topic carried a non-observation");
  obs_ = {body->norm_traffic, body->cpu_gap};
  message_index_ = agent_ ? agent_->choose_message(obs_, prev_recv_) : 0;
  if (uses_messages(variant_))
    bus_->publish({TopicLayout::msg_broadcast_topic(), 0, agent_id(slice_), t,
                   MessageBody{Agent::symbol_of(message_index_)}});
}

void AgentEndpoint::publish_action(std::int64_t t, std::chrono::milliseconds wait) {
  recv_ = null_messages(num_slices_);
  if (uses_messages(variant_)) {
    for (int got = 0; got < num_slices_ - 1; ++got) {
      const Envelope e = take(msg_in_, t, wait);
      const auto* body = std::get_if<MessageBody>(&e.payload);
      const int peer = sender_slice(e.sender);
      if (!body || peer < 0 || peer >= num_slices_ || peer == slice_)
        throw OrchestrationFault(agent_id(slice_) + ": malformed message from '" + e.sender + "'");
      recv_[static_cast<std::size_t>(peer < slice_ ? peer : peer - 1)] = body->symbol;
    }
  }
  if (agent_ && pending_) {
    pending_->next_obs = obs_;
    pending_->next_recv = recv_;
    if (agent_->learning()) agent_->remember(std::move(*pending_));
    pending_.reset();
  }
  double allocation = f_th_;
  action_index_ = 0;
  if (agent_) {
    action_index_ = agent_->choose_action(obs_, recv_);
    allocation = agent_->allocation(action_index_);
  }
  const int symbol = uses_messages(variant_) ? Agent::symbol_of(message_index_) : 0;
  bus_->publish({TopicLayout::action_topic(slice_), 0, agent_id(slice_), t,
                 ActionBody{action_index_, symbol, allocation}});
}

void AgentEndpoint::take_reward(std::int64_t t, bool terminal, std::chrono::milliseconds wait) {
  const Envelope e = take(reward_in_, t, wait);
  const auto* body = std::get_if<RewardBody>(&e.payload);
  if (!body) throw OrchestrationFault(agent_id(slice_) + ": reward topic carried a non-reward");
  if (agent_) {
    Transition tr;
    tr.obs = obs_;
    tr.recv = recv_;
    tr.action = action_index_;
    tr.message = message_index_;
    tr.reward = body->reward;
    if (terminal) {
      tr.next_obs = obs_;
      tr.next_recv = recv_;
      tr.terminal = true;
      if (agent_->learning()) agent_->remember(std::move(tr));
    } else {
      pending_ = std::move(tr);
    }
  }
  prev_recv_ = recv_;
}

// ---------------------------------------------------------------------------
// Server side.

SliceServer::SliceServer(SliceEnvironment& env, Bus& bus) : env_(env), bus_(bus) {
  const int k = static_cast<int>(env.size());
  for (const auto& topic : TopicLayout::all(k)) bus.declare(topic);
  for (int i = 0; i < k; ++i) action_subs_.push_back(subscribe(bus, TopicLayout::action_topic(i), 0, server_id()));
  action_buf_.resize(static_cast<std::size_t>(k));
}

void SliceServer::publish_observations(std::int64_t t) {
  for (std::size_t k = 0; k < env_.size(); ++k) {
    const Observation o = observe(env_, k);
    bus_.publish({TopicLayout::obs_topic(static_cast<int>(k)), 0, server_id(), t,
                  ObservationBody{o.norm_traffic, o.cpu_gap}});
  }
}

StepRows SliceServer::collect_and_step(std::int64_t t, std::chrono::milliseconds wait) {
  const std::size_t n = env_.size();
  std::vector<ActionBody> actions(n);
  const auto deadline = std::chrono::steady_clock::now() + wait;
  for (std::size_t k = 0; k < n; ++k) {
    auto& buf = action_buf_[k];
    const std::string expected = agent_id(static_cast<int>(k));
    std::optional<ActionBody> found;
    while (!found) {
      while (!buf.empty() && !found) {
        Envelope e = std::move(buf.front());
        buf.pop_front();
        const auto* body = std::get_if<ActionBody>(&e.payload);
        if (e.step == t && e.sender == expected && body) found = *body;
      }
      if (found) break;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      for (auto& e : action_subs_[k].poll(std::max(left, std::chrono::milliseconds(0))))
        buf.push_back(std::move(e));
      if (buf.empty() && std::chrono::steady_clock::now() >= deadline)
        throw OrchestrationFault("missing action from " + expected + " at step " + std::to_string(t));
    }
    actions[k] = *found;
  }

  std::vector<double> requested(n);
  for (std::size_t k = 0; k < n; ++k) requested[k] = actions[k].allocation;
  const EnvStepResult res = env_.step(requested);

  StepRows rows(n);
  for (std::size_t k = 0; k < n; ++k) {
    const StepOutcome& o = res.slices[k];
    SliceStepRow& r = rows[k];
    r.slice = static_cast<int>(k);
    r.requested = o.requested;
    r.action = o.allocation;
    r.action_index = actions[k].action_index;
    r.message = actions[k].message_index;
    r.reward = o.reward;
    r.conflict = res.conflict.conflict;
    r.violator = o.violator;
    r.latency = o.latency.total;
    r.utilization = o.utilization;
  }
  return rows;
}

void SliceServer::publish_rewards(std::int64_t t, const StepRows& rows) {
  for (const auto& r : rows)
    bus_.publish({TopicLayout::reward_topic(r.slice), 0, server_id(), t,
                  RewardBody{r.reward, r.conflict, r.violator}});
}

void SliceServer::publish_metric(const MetricBody& sample, std::int64_t t) {
  bus_.publish({TopicLayout::metrics_topic(), 0, server_id(), t, sample});
}

StepRows run_step(SliceServer& server, std::span<AgentEndpoint* const> agents, std::int64_t t,
                  bool terminal) {
  constexpr std::chrono::milliseconds kNoWait{0};
  server.publish_observations(t);
  for (AgentEndpoint* a : agents) a->publish_message(t, kNoWait);
  for (AgentEndpoint* a : agents) a->publish_action(t, kNoWait);
  StepRows rows = server.collect_and_step(t, kNoWait);
  server.publish_rewards(t, rows);
  for (AgentEndpoint* a : agents) a->take_reward(t, terminal, kNoWait);
  return rows;
}

// ---------------------------------------------------------------------------
// Runs.

std::vector<std::unique_ptr<Agent>> make_agents(const Scenario& scenario, Variant variant,
                                                const AgentConfig& cfg, std::uint64_t seed) {
  std::vector<std::unique_ptr<Agent>> agents;
  if (!is_learning(variant)) return agents;
  const int n = static_cast<int>(scenario.size());
  for (int k = 0; k < n; ++k)
    agents.push_back(std::make_unique<Agent>(k, n - 1, scenario.slices[static_cast<std::size_t>(k)].f_th,
                                             variant, cfg, derive_seed(seed, {kAgentStream, std::uint64_t(k)})));
  return agents;
}

namespace {

void dump_and_truncate(InProcBus& bus, std::ostream* log) {
  if (log) {
    for (const auto& topic : bus.topics())
      for (const auto& e : bus.fetch(topic, 0)) *log << encode_wire(e);
  }
  bus.truncate_all();
}

struct EpisodeLoop {
  const Scenario& scenario;
  const RunConfig& run;
  Variant variant;
  std::uint64_t seed;
  bool training;
  const RunHooks& hooks;
  std::vector<std::unique_ptr<Agent>>& agents;

  void set_agent_episode(Agent& a, int e) const {
    if (training) a.set_progress(static_cast<double>(e) / run.episodes);
  }

  void publish_episode_metrics(SliceServer& server, Subscription& metrics_sub, MetricsRegistry& registry,
                               const EpisodeRecord& rec, std::int64_t t) const {
    const Labels labels{{"seed", std::to_string(seed)}, {"variant", to_string(variant)}};
    const std::pair<const char*, double> series[] = {
        {"slicing_episode_reward", rec.mean_reward},
        {"slicing_conflict_rate", rec.conflict_rate},
        {"slicing_utilization", rec.mean_utilization},
        {"slicing_latency_seconds", rec.mean_latency},
    };
    for (const auto& [name, value] : series) server.publish_metric({name, labels, value, rec.episode}, t);
    for (const auto& e : metrics_sub.poll())
      if (const auto* m = std::get_if<MetricBody>(&e.payload)) registry.record(*m);
  }

  RunOutput go() {
    run.validate();
    RunOutput out;
    out.variant = variant;
    out.seed = seed;
    out.metrics = std::make_unique<MetricsRegistry>();
    SliceEnvironment env(scenario);
    InProcBus bus;
    SliceServer server(env, bus);
    Subscription metrics_sub = subscribe(bus, TopicLayout::metrics_topic(), 0, kMetricsReader);

    const int n = static_cast<int>(scenario.size());
    std::vector<std::unique_ptr<AgentEndpoint>> endpoints;
    for (int k = 0; k < n; ++k)
      endpoints.push_back(std::make_unique<AgentEndpoint>(
          k, n, variant, scenario.slices[static_cast<std::size_t>(k)].f_th,
          agents.empty() ? nullptr : agents[static_cast<std::size_t>(k)].get()));

    std::unique_ptr<BusServer> bus_server;
    std::unique_ptr<MetricsHttpServer> http;
    std::vector<std::unique_ptr<SocketBusClient>> clients;
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> agent_errors(static_cast<std::size_t>(n));
    const bool socket = run.bus_mode == BusMode::kSocket;
    const std::chrono::milliseconds wait = socket ? run.step_timeout : std::chrono::milliseconds(0);
    const std::uint64_t stream = training ? kEpisodeStream : kEvalStream;

    if (!run.metrics_addr.empty()) {
      const SocketAddress a = parse_socket_address(run.metrics_addr);
      http = std::make_unique<MetricsHttpServer>(*out.metrics, a.host, a.port);
    }
    if (socket) {
      bus_server = std::make_unique<BusServer>(bus, parse_socket_address(run.listen_addr));
      SocketAddress addr = parse_socket_address(run.listen_addr);
      addr.port = bus_server->port();
      for (int k = 0; k < n; ++k) {
        clients.push_back(std::make_unique<SocketBusClient>(addr, run.step_timeout));
        endpoints[static_cast<std::size_t>(k)]->attach(*clients.back());
      }
      for (int k = 0; k < n; ++k) {
        threads.emplace_back([&, k] {
          AgentEndpoint& ep = *endpoints[static_cast<std::size_t>(k)];
          try {
            for (int e = 0; e < run.episodes; ++e) {
              if (!agents.empty()) set_agent_episode(*agents[static_cast<std::size_t>(k)], e);
              ep.begin_episode();
              for (int t = 0; t < run.steps; ++t) {
                const std::int64_t g = std::int64_t(e) * run.steps + t;
                ep.publish_message(g, wait);
                ep.publish_action(g, wait);
                ep.take_reward(g, t == run.steps - 1, wait);
              }
            }
          } catch (...) {
            agent_errors[static_cast<std::size_t>(k)] = std::current_exception();
          }
        });
      }
    } else {
      for (auto& ep : endpoints) ep->attach(bus);
    }
    std::vector<AgentEndpoint*> raw;
    for (auto& ep : endpoints) raw.push_back(ep.get());

    auto finish_threads = [&] {
      for (auto& th : threads)
        if (th.joinable()) th.join();
      if (bus_server) bus_server->stop();
    };

    int e = 0;
    try {
      for (e = 0; e < run.episodes; ++e) {
        env.reset(derive_seed(seed, {stream, static_cast<std::uint64_t>(e)}));
        if (!socket) {
          for (auto& a : agents) set_agent_episode(*a, e);
          for (auto& ep : endpoints) ep->begin_episode();
        }
        EpisodeRecord rec;
        rec.episode = e;
        rec.steps.reserve(static_cast<std::size_t>(run.steps));
        for (int t = 0; t < run.steps; ++t) {
          const std::int64_t g = std::int64_t(e) * run.steps + t;
          const bool terminal = t == run.steps - 1;
          StepRows rows;
          if (socket) {
            server.publish_observations(g);
            rows = server.collect_and_step(g, wait);
            if (t == 0) dump_and_truncate(bus, hooks.bus_log);
            server.publish_rewards(g, rows);
          } else {
            rows = run_step(server, raw, g, terminal);
            if (t == 0) dump_and_truncate(bus, hooks.bus_log);
          }
          rec.steps.push_back(std::move(rows));
        }
        rec.finalize();
        publish_episode_metrics(server, metrics_sub, *out.metrics, rec, std::int64_t(e + 1) * run.steps - 1);
        if (hooks.episode_csv) write_episode_csv_rows(*hooks.episode_csv, rec);
        if (hooks.on_episode) hooks.on_episode(rec);
        if (!hooks.keep_rows) rec.steps.clear();
        out.episodes.push_back(std::move(rec));
      }
      // Agent threads still hold the final reward fetch; truncating first would drop it.
      finish_threads();
      dump_and_truncate(bus, hooks.bus_log);
    } catch (const DivergenceError& err) {
      finish_threads();
      throw DivergenceError("episode " + std::to_string(e) + ": " + err.what());
    } catch (const OrchestrationFault&) {
      finish_threads();
      for (auto& ae : agent_errors) {
        if (!ae) continue;
        try {
          std::rethrow_exception(ae);
        } catch (const DivergenceError& err) {
          throw DivergenceError("episode " + std::to_string(e) + ": " + err.what());
        }
      }
      throw;
    } catch (...) {
      finish_threads();
      throw;
    }
    finish_threads();
    for (auto& ae : agent_errors)
      if (ae) std::rethrow_exception(ae);
    out.agents = std::move(agents);
    return out;
  }
};

}  // namespace

RunOutput train(const Scenario& scenario, const AgentConfig& agent_cfg, const RunConfig& run,
                std::uint64_t seed, const RunHooks& hooks) {
  auto agents = make_agents(scenario, run.variant, agent_cfg, seed);
  return EpisodeLoop{scenario, run, run.variant, seed, true, hooks, agents}.go();
}

RunOutput evaluate(const Scenario& scenario, std::vector<std::unique_ptr<Agent>> agents, Variant variant,
                   const RunConfig& run, std::uint64_t seed, const RunHooks& hooks) {
  if (is_learning(variant) && agents.size() != scenario.size())
    throw ValidationError("evaluation needs one agent per slice");
  std::vector<std::pair<double, bool>> saved;
  for (auto& a : agents) {
    if (a->variant() != variant) throw ValidationError("agent variant does not match the evaluated variant");
    saved.emplace_back(a->epsilon(), a->learning());
    a->set_epsilon(0.0);
    a->set_learning(false);
  }
  RunOutput out = EpisodeLoop{scenario, run, variant, seed, false, hooks, agents}.go();
  for (std::size_t k = 0; k < out.agents.size(); ++k) {
    out.agents[k]->set_epsilon(saved[k].first);
    out.agents[k]->set_learning(saved[k].second);
  }
  return out;
}

double tail_mean(std::span<const double> values, std::size_t window) {
  if (values.empty()) return 0.0;
  const std::size_t n = std::min(window, values.size());
  double s = 0.0;
  for (std::size_t i = values.size() - n; i < values.size(); ++i) s += values[i];
  return s / static_cast<double>(n);
}

CompareResult compare(const Scenario& scenario, const AgentConfig& agent_cfg, const RunConfig& run,
                      const std::vector<Variant>& variants,
                      const std::function<void(RunOutput&)>& on_run) {
  run.validate();
  CompareResult res;
  res.variants = variants;
  res.seeds = run.seeds;
  const auto episodes = static_cast<std::size_t>(run.episodes);
  const auto window = static_cast<std::size_t>(run.final_window);
  for (Variant v : variants) {
    RunConfig r = run;
    r.variant = v;
    std::vector<double> conflict(episodes, 0.0), util(episodes, 0.0), reward(episodes, 0.0);
    VariantSummary sum;
    sum.variant = v;
    for (std::uint64_t seed : run.seeds) {
      RunOutput out = train(scenario, agent_cfg, r, seed);
      std::vector<double> c(episodes), u(episodes), w(episodes);
      for (std::size_t e = 0; e < episodes; ++e) {
        c[e] = out.episodes[e].conflict_rate;
        u[e] = out.episodes[e].mean_utilization;
        w[e] = out.episodes[e].mean_reward;
        conflict[e] += c[e];
        util[e] += u[e];
        reward[e] += w[e];
      }
      sum.per_seed_conflict.push_back(tail_mean(c, window));
      sum.per_seed_utilization.push_back(tail_mean(u, window));
      if (on_run) on_run(out);
    }
    const double ns = static_cast<double>(run.seeds.size());
    for (std::size_t e = 0; e < episodes; ++e) {
      conflict[e] /= ns;
      util[e] /= ns;
      reward[e] /= ns;
    }
    sum.final_conflict = tail_mean(conflict, window);
    sum.final_utilization = tail_mean(util, window);
    sum.final_reward = tail_mean(reward, window);
    res.conflict_grid.push_back(std::move(conflict));
    res.utilization_grid.push_back(std::move(util));
    res.summary.push_back(std::move(sum));
  }
  for (auto& s : res.summary) s.conflict_delta = s.final_conflict - res.summary.front().final_conflict;
  return res;
}

void write_grid_csv(std::ostream& out, const std::vector<Variant>& variants,
                    const std::vector<std::vector<double>>& grid) {
  if (grid.size() != variants.size()) throw ContractViolation("one grid row per variant");
  out << "variant";
  const std::size_t cols = grid.empty() ? 0 : grid.front().size();
  for (std::size_t e = 0; e < cols; ++e) out << ',' << e;
  out << '\n';
  for (std::size_t v = 0; v < variants.size(); ++v) {
    out << to_string(variants[v]);
    for (double x : grid[v]) out << ',' << fmt(x);
    out << '\n';
  }
}

void write_summary(std::ostream& out, const CompareResult& result, int final_window) {
  out << "final " << final_window << " episodes, " << result.seeds.size() << " seed(s)\n";
  out << std::left << std::setw(18) << "variant" << std::setw(14) << "conflict" << std::setw(14)
      << "utilization" << std::setw(14) << "reward" << "conflict_delta\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& s : result.summary)
    out << std::setw(18) << to_string(s.variant) << std::setw(14) << s.final_conflict << std::setw(14)
        << s.final_utilization << std::setw(14) << s.final_reward << s.conflict_delta << '\n';
  out.unsetf(std::ios::floatfield);
}

void save_checkpoints(const std::string& dir, const std::vector<std::unique_ptr<Agent>>& agents,
                      std::vector<std::string>* written) {
  std::filesystem::create_directories(dir);
  for (const auto& a : agents) {
    const std::string name = "agent-" + std::to_string(a->id()) + ".ckpt";
    const std::filesystem::path path = std::filesystem::path(dir) / name;
    std::ofstream f(path);
    if (!f) throw Error("cannot write checkpoint " + path.string());
    a->save(f);
    if (!f) throw Error("failed writing checkpoint " + path.string());
    if (written) written->push_back(name);
  }
}

void load_checkpoints(const std::string& dir, std::vector<std::unique_ptr<Agent>>& agents) {
  for (auto& a : agents) {
    const std::filesystem::path path = std::filesystem::path(dir) / ("agent-" + std::to_string(a->id()) + ".ckpt");
    std::ifstream f(path);
    if (!f) throw ValidationError("missing checkpoint " + path.string());
    try {
      a->load(f);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }
}

}  // namespace slicing
