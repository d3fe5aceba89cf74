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

// Two-stage edge/RAN queue per slice, Little's-law latency, utilization,
// conflict detection and the per-slice reward. Everything here is a pure
// function of its arguments.

#ifndef SLICING_QUEUE_MODEL_HPP_
#define SLICING_QUEUE_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slicing/traffic.hpp"

namespace slicing {

struct EdgeConfig {
  double f_max = 40.0;             // total CPU, in allocation units (Gcycle/s)
  double bits_per_cycle = 1e-4;    // U
  double tau = 0.01;               // s per step
  double delta_t = 0.01;           // s of radio transmission per step
  double cycles_per_unit = 1e9;    // cycles/s in one allocation unit

  void validate() const;

  // Bits the edge can process in one step at allocation `f_alloc`.
  double edge_capacity_bits(double f_alloc) const {
    return tau * f_alloc * cycles_per_unit * bits_per_cycle;
  }
  // Bits/s processed at allocation `f_alloc`.
  double processing_rate(double f_alloc) const {
    return f_alloc * cycles_per_unit * bits_per_cycle;
  }
};

struct SliceConfig {
  int id = 0;
  std::string name;
  double f_th = 0.0;                       // isolation share
  double channel_capacity = 0.0;           // bits/s when `capacity_series` is empty
  std::vector<double> capacity_series;     // optional per-step bits/s, cycled
  TrafficProfile traffic;

  double capacity_at(std::int64_t step) const;
};

struct QueueState {
  double q_edge = 0.0;
  double q_ran = 0.0;
  double cum_q_edge = 0.0;         // bit-steps
  double cum_q_ran = 0.0;          // bit-steps
  double cum_arrival_bits = 0.0;
  std::int64_t steps = 0;

  friend bool operator==(const QueueState&, const QueueState&) = default;
};

enum class RanMode { kCorrected, kLiteral };
enum class LatencyMode { kLittleConsistent, kProduct };

RanMode parse_ran_mode(const std::string& s);
LatencyMode parse_latency_mode(const std::string& s);
std::string to_string(RanMode m);
std::string to_string(LatencyMode m);

struct EdgeStep {
  QueueState state;
  double processed = 0.0;       // min(q_edge, edge capacity)
  double edge_capacity = 0.0;   // U^(e), needed by the literal RAN update
};

struct RanStep {
  QueueState state;
  double transmitted = 0.0;     // min(q_ran, U^(r))
};

struct Latency {
  double edge = 0.0;
  double ran = 0.0;
  double total = 0.0;
};

struct RewardParams {
  double theta = 1.0;
  double alpha = 1.0;
  double latency_scale = 0.05;  // s

  void validate() const;
};

struct ConflictInfo {
  bool conflict = false;
  std::vector<int> violators;   // ascending slice indices

  bool is_violator(int k) const;
};

// q_edge' = max(0, q_edge - tau*f*U) + arrival. Throws ContractViolation when
// f_alloc < 0.
EdgeStep step_edge_queue(const QueueState& state, double arrival_bits,
                         double f_alloc, const EdgeConfig& cfg);

// Corrected: q_ran' = max(0, q_ran - dt*C) + processed.
// Literal:   q_ran' = max(0, q_ran - dt*C) + min(q_ran, U^(e)).
RanStep step_ran_queue(const QueueState& state, double processed_inflow,
                       double edge_capacity, double capacity_bps,
                       const EdgeConfig& cfg, RanMode mode);

// Adds the post-step queues and the arrivals to the running sums.
QueueState accumulate(const QueueState& state, double arrival_bits);

double total_queue(const QueueState& state);

// Long-term latency over the steps seen so far. Throws ContractViolation when
// state.steps == 0.
Latency latency(const QueueState& state, const EdgeConfig& cfg, LatencyMode mode);

// Phi / (U * a), with `alloc_cycles` in cycles/s.
double utilization_slice(double traffic_bps, double alloc_cycles,
                         double bits_per_cycle);

// sum(Phi) / (U * f_max).
double utilization_total(std::span<const double> traffic_bps, const EdgeConfig& cfg);

// conflict <=> sum(a) > f_max; violators are the slices above their share.
ConflictInfo detect_conflict(std::span<const double> actions,
                             std::span<const double> f_th, double f_max);

double compute_reward(int k, const ConflictInfo& conflict, double latency_s,
                      const RewardParams& params);

}  // namespace slicing

#endif  // SLICING_QUEUE_MODEL_HPP_
