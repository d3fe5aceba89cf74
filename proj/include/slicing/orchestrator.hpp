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

// Episode engine. The server publishes observations, agents answer through
// the bus in two phases (message, then action), and the server clamps,
// steps the environment and publishes rewards.

#ifndef SLICING_ORCHESTRATOR_HPP_
#define SLICING_ORCHESTRATOR_HPP_

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slicing/agent.hpp"
#include "slicing/bus.hpp"
#include "slicing/config.hpp"
#include "slicing/environment.hpp"
#include "slicing/metrics.hpp"

namespace slicing {

enum class BusMode { kInProc, kSocket };

struct RunConfig {
  int episodes = 500;
  int steps = 200;
  std::vector<std::uint64_t> seeds{1};
  Variant variant = Variant::kIb;
  int final_window = 100;             // episodes used for end-of-training figures
  BusMode bus_mode = BusMode::kInProc;
  std::string listen_addr = "127.0.0.1:0";
  std::chrono::milliseconds step_timeout{5000};   // socket mode barrier
  std::string metrics_addr;           // host:port for GET /metrics; empty disables

  void validate() const;
  // Reads `run.*`, `bus.*` and `metrics.*` keys.
  static RunConfig from_config(const KeyValueConfig& cfg);
};

struct SliceStepRow {
  int slice = 0;
  double requested = 0.0;
  double action = 0.0;        // effective allocation, Gcycle/s
  int action_index = 0;
  int message = 0;            // symbol sent this step; 0 when none
  double reward = 0.0;
  bool conflict = false;
  bool violator = false;
  double latency = 0.0;
  double utilization = 0.0;   // per-slice traffic over allocated capacity
};

using StepRows = std::vector<SliceStepRow>;

// Served over allocated capacity for one step: sum a*min(Z,1) / sum a.
double step_utilization(std::span<const SliceStepRow> rows);

struct EpisodeRecord {
  int episode = 0;
  std::vector<StepRows> steps;
  std::int64_t num_steps = 0;
  std::int64_t conflicts = 0;
  double mean_reward = 0.0;
  double conflict_rate = 0.0;
  double mean_utilization = 0.0;
  double mean_latency = 0.0;

  // Recomputes the aggregates from `steps`.
  void finalize();
};

// episode,step,slice,action,message,reward,conflict,latency,utilization
void write_episode_csv_header(std::ostream& out);
void write_episode_csv_rows(std::ostream& out, const EpisodeRecord& record);
// Throws ParseError (with line) or ValidationError (empty body).
std::vector<EpisodeRecord> parse_episode_csv(std::string_view text);

Observation observe(const SliceEnvironment& env, std::size_t k);

// Agent side of the protocol. Reads only its own observation and reward
// topics and the message broadcast. `agent` is null for the static baseline.
class AgentEndpoint {
 public:
  AgentEndpoint(int slice, int num_slices, Variant variant, double f_th, Agent* agent);
  virtual ~AgentEndpoint() = default;

  int slice() const { return slice_; }
  void attach(Bus& bus);
  void begin_episode();

  // Phase 1: reads o_t, picks m_t from the previous step's messages.
  virtual void publish_message(std::int64_t t, std::chrono::milliseconds wait);
  // Phase 2: reads the step's peer messages, picks a_t.
  virtual void publish_action(std::int64_t t, std::chrono::milliseconds wait);
  virtual void take_reward(std::int64_t t, bool terminal, std::chrono::milliseconds wait);

 protected:
  Bus* bus() const { return bus_; }

 private:
  struct Inbox {
    std::optional<Subscription> sub;
    std::deque<Envelope> buffer;
  };
  // First envelope for step t from a non-self sender; older ones are dropped.
  Envelope take(Inbox& inbox, std::int64_t t, std::chrono::milliseconds wait);

  int slice_;
  int num_slices_;
  Variant variant_;
  double f_th_;
  Agent* agent_;
  Bus* bus_ = nullptr;
  Inbox obs_in_, msg_in_, reward_in_;
  Observation obs_;
  MessageVector prev_recv_, recv_;
  int message_index_ = 0;
  int action_index_ = 0;
  std::optional<Transition> pending_;
};

// Server side: observation fan-out, action barrier, environment step,
// reward fan-out.
class SliceServer {
 public:
  SliceServer(SliceEnvironment& env, Bus& bus);

  void publish_observations(std::int64_t t);
  // Waits up to `wait` for all actions; a missing one raises
  // OrchestrationFault. Steps the environment but publishes nothing.
  StepRows collect_and_step(std::int64_t t, std::chrono::milliseconds wait);
  void publish_rewards(std::int64_t t, const StepRows& rows);
  void publish_metric(const MetricBody& sample, std::int64_t t);

 private:
  SliceEnvironment& env_;
  Bus& bus_;
  std::vector<Subscription> action_subs_;
  std::vector<std::deque<Envelope>> action_buf_;
};

// One in-process step: observations, every agent's phase 1, every agent's
// phase 2, then the server step and reward delivery.
StepRows run_step(SliceServer& server, std::span<AgentEndpoint* const> agents, std::int64_t t,
                  bool terminal);

struct RunHooks {
  std::ostream* episode_csv = nullptr;   // rows only; caller writes the header
  std::ostream* bus_log = nullptr;       // wire records, per episode
  bool keep_rows = false;                // keep per-step rows in the output
  std::function<void(const EpisodeRecord&)> on_episode;
};

struct RunOutput {
  Variant variant = Variant::kStaticBaseline;
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  std::vector<std::unique_ptr<Agent>> agents;   // empty for the static baseline
  std::unique_ptr<MetricsRegistry> metrics;
};

std::vector<std::unique_ptr<Agent>> make_agents(const Scenario& scenario, Variant variant,
                                                const AgentConfig& cfg, std::uint64_t seed);

// Trains fresh agents for `run.episodes`. DivergenceError messages carry the
// episode index.
RunOutput train(const Scenario& scenario, const AgentConfig& agent_cfg, const RunConfig& run,
                std::uint64_t seed, const RunHooks& hooks = {});

// Greedy rollouts without learning. Agents are moved in and handed back in
// the output unchanged.
RunOutput evaluate(const Scenario& scenario, std::vector<std::unique_ptr<Agent>> agents,
                   Variant variant, const RunConfig& run, std::uint64_t seed,
                   const RunHooks& hooks = {});

struct VariantSummary {
  Variant variant = Variant::kStaticBaseline;
  double final_conflict = 0.0;
  double final_utilization = 0.0;
  double final_reward = 0.0;
  double conflict_delta = 0.0;   // against the first variant
  std::vector<double> per_seed_conflict;
  std::vector<double> per_seed_utilization;
};

struct CompareResult {
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> conflict_grid;       // [variant][episode], seed mean
  std::vector<std::vector<double>> utilization_grid;
  std::vector<VariantSummary> summary;
};

// Runs every variant on the same seeds. `on_run` sees each finished run.
CompareResult compare(const Scenario& scenario, const AgentConfig& agent_cfg, const RunConfig& run,
                      const std::vector<Variant>& variants,
                      const std::function<void(RunOutput&)>& on_run = {});

// Mean of the last `window` values (all of them if shorter).
double tail_mean(std::span<const double> values, std::size_t window);

// One row per variant: variant,<episode 0>,<episode 1>,... after a header.
void write_grid_csv(std::ostream& out, const std::vector<Variant>& variants,
                    const std::vector<std::vector<double>>& grid);
void write_summary(std::ostream& out, const CompareResult& result, int final_window);

void save_checkpoints(const std::string& dir, const std::vector<std::unique_ptr<Agent>>& agents,
                      std::vector<std::string>* written = nullptr);
// Throws ValidationError when a file is missing or does not fit.
void load_checkpoints(const std::string& dir, std::vector<std::unique_ptr<Agent>>& agents);

}  // namespace slicing

#endif  // SLICING_ORCHESTRATOR_HPP_
