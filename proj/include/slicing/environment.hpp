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

#ifndef SLICING_ENVIRONMENT_HPP_
#define SLICING_ENVIRONMENT_HPP_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "slicing/config.hpp"
#include "slicing/queue_model.hpp"
#include "slicing/random.hpp"
#include "slicing/traffic.hpp"

namespace slicing {

struct Scenario {
  EdgeConfig edge;
  std::vector<SliceConfig> slices;
  RewardParams reward;
  RanMode ran_mode = RanMode::kCorrected;
  LatencyMode latency_mode = LatencyMode::kLittleConsistent;
  // Traffic normalizer for observations, bits/s per slice. Empty means
  // `norm_factor` times the slice's share processing rate.
  std::vector<double> traffic_norm;
  double norm_factor = 1.5;
  double latency_threshold = 0.2;   // s, for CDF reporting
  std::shared_ptr<const TraceSource> trace;

  std::size_t size() const { return slices.size(); }
  std::vector<double> shares() const;
  double traffic_normalizer(std::size_t k) const;

  // Throws ContractViolation on an invalid field; returns a warning string
  // (empty if none), e.g. when the shares oversubscribe f_max.
  std::string validate() const;

  // Reads `edge.*`, `slices.*`, `traffic.*`, `reward.*`, `env.*` keys.
  static Scenario from_config(const KeyValueConfig& cfg);
};

struct StepOutcome {
  double requested = 0.0;        // allocation asked for
  double allocation = 0.0;       // effective allocation after clamping
  double arrival_bits = 0.0;
  double traffic_bps = 0.0;      // arrival_bits / tau
  double processed_edge = 0.0;
  double transmitted = 0.0;
  Latency latency;
  double utilization = 0.0;      // traffic / (U * allocation); 0 if allocation is 0
  double reward = 0.0;
  bool violator = false;
};

struct EnvStepResult {
  std::int64_t step = 0;         // index of the step just taken
  ConflictInfo conflict;
  std::vector<StepOutcome> slices;
};

// One edge domain shared by K slices. `step` must be called serially; slice
// work is done in slice-index order.
class SliceEnvironment {
 public:
  explicit SliceEnvironment(Scenario scenario);

  // Zeroes all queues and re-seeds the per-slice traffic streams.
  void reset(std::uint64_t episode_seed);

  // Conflict check on the requested joint action, violators clamped to their
  // share, then per slice: arrivals, edge queue, RAN queue, running sums,
  // latency, utilization, reward. Throws ContractViolation on a wrong action
  // count or a negative allocation.
  EnvStepResult step(std::span<const double> requested);

  const Scenario& scenario() const { return scenario_; }
  std::size_t size() const { return scenario_.size(); }
  std::int64_t t() const { return t_; }
  const std::vector<QueueState>& queues() const { return queues_; }
  // Traffic seen in the previous step (bits/s); 0 before the first step.
  double last_traffic_bps(std::size_t k) const { return last_traffic_[k]; }
  // Effective allocation of the previous step; the share before the first.
  double last_allocation(std::size_t k) const { return last_allocation_[k]; }

 private:
  double draw_arrival_bits(std::size_t k);

  Scenario scenario_;
  std::vector<double> shares_;
  std::vector<QueueState> queues_;
  std::vector<Rng> traffic_rngs_;
  std::vector<double> last_traffic_;
  std::vector<double> last_allocation_;
  std::int64_t t_ = 0;
};

// CSV state dump, one row per slice per step:
// step,slice,allocation,arrival_bits,q_edge,q_ran,processed,transmitted,latency
void write_state_csv_header(std::ostream& out);
void write_state_csv_rows(std::ostream& out, const EnvStepResult& result,
                          const std::vector<QueueState>& queues);

}  // namespace slicing

#endif  // SLICING_ENVIRONMENT_HPP_
