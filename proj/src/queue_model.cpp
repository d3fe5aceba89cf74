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

#include "slicing/queue_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "slicing/error.hpp"

namespace slicing {

void EdgeConfig::validate() const {
  if (!(f_max > 0.0)) throw ContractViolation("f_max must be > 0");
  if (!(bits_per_cycle > 0.0)) throw ContractViolation("bits_per_cycle must be > 0");
  if (!(tau > 0.0)) throw ContractViolation("tau must be > 0");
  if (!(delta_t > 0.0)) throw ContractViolation("delta_t must be > 0");
  if (!(cycles_per_unit > 0.0)) throw ContractViolation("cycles_per_unit must be > 0");
}

double SliceConfig::capacity_at(std::int64_t step) const {
  if (capacity_series.empty()) return channel_capacity;
  const auto n = static_cast<std::int64_t>(capacity_series.size());
  return capacity_series[static_cast<std::size_t>(((step % n) + n) % n)];
}

void RewardParams::validate() const {
  if (!(theta >= 0.0)) throw ContractViolation("theta must be >= 0");
  if (!(alpha > 0.0)) throw ContractViolation("alpha must be > 0");
  if (!(latency_scale > 0.0)) throw ContractViolation("latency_scale must be > 0");
}

RanMode parse_ran_mode(const std::string& s) {
  if (s == "corrected") return RanMode::kCorrected;
  if (s == "literal") return RanMode::kLiteral;
  throw ValidationError("unknown RAN queue mode '" + s + "'");
}

LatencyMode parse_latency_mode(const std::string& s) {
  if (s == "little-consistent") return LatencyMode::kLittleConsistent;
  if (s == "paper-literal") return LatencyMode::kProduct;
  throw ValidationError("unknown latency mode '" + s + "'");
}

std::string to_string(RanMode m) {
  return m == RanMode::kCorrected ? "corrected" : "literal";
}

std::string to_string(LatencyMode m) {
  return m == LatencyMode::kLittleConsistent ? "little-consistent" : "paper-literal";
}

bool ConflictInfo::is_violator(int k) const {
  return std::binary_search(violators.begin(), violators.end(), k);
}

EdgeStep step_edge_queue(const QueueState& state, double arrival_bits,
                         double f_alloc, const EdgeConfig& cfg) {
  if (!(f_alloc >= 0.0))
    throw ContractViolation("CPU allocation must be >= 0, got " + std::to_string(f_alloc));
  if (!(arrival_bits >= 0.0)) throw ContractViolation("arrival bits must be >= 0");
  EdgeStep out;
  out.edge_capacity = cfg.edge_capacity_bits(f_alloc);
  out.processed = std::min(state.q_edge, out.edge_capacity);
  out.state = state;
  out.state.q_edge = std::max(0.0, state.q_edge - out.edge_capacity) + arrival_bits;
  return out;
}

RanStep step_ran_queue(const QueueState& state, double processed_inflow,
                       double edge_capacity, double capacity_bps,
                       const EdgeConfig& cfg, RanMode mode) {
  if (!(processed_inflow >= 0.0)) throw ContractViolation("RAN inflow must be >= 0");
  const double radio_bits = cfg.delta_t * capacity_bps;
  const double inflow =
      mode == RanMode::kCorrected ? processed_inflow : std::min(state.q_ran, edge_capacity);
  RanStep out;
  out.transmitted = std::min(state.q_ran, radio_bits);
  out.state = state;
  out.state.q_ran = std::max(0.0, state.q_ran - radio_bits) + inflow;
  return out;
}

QueueState accumulate(const QueueState& state, double arrival_bits) {
  QueueState s = state;
  s.cum_q_edge += s.q_edge;
  s.cum_q_ran += s.q_ran;
  s.cum_arrival_bits += arrival_bits;
  s.steps += 1;
  return s;
}

double total_queue(const QueueState& state) { return state.q_edge + state.q_ran; }

Latency latency(const QueueState& state, const EdgeConfig& cfg, LatencyMode mode) {
  if (state.steps < 1) throw ContractViolation("latency undefined before the first step");
  const double steps = static_cast<double>(state.steps);
  const double mean_arrival = state.cum_arrival_bits / (steps * cfg.tau);
  const double avg_edge = state.cum_q_edge / steps;
  const double avg_ran = state.cum_q_ran / steps;
  Latency l;
  if (mode == LatencyMode::kProduct) {
    l.edge = mean_arrival * avg_edge;
    l.ran = mean_arrival * avg_ran;
  } else if (mean_arrival > 0.0) {
    l.edge = avg_edge / mean_arrival;
    l.ran = avg_ran / mean_arrival;
  }
  l.total = l.edge + l.ran;
  return l;
}

double utilization_slice(double traffic_bps, double alloc_cycles,
                         double bits_per_cycle) {
  if (!(alloc_cycles > 0.0))
    throw ContractViolation("utilization undefined for a zero allocation");
  return traffic_bps / (bits_per_cycle * alloc_cycles);
}

double utilization_total(std::span<const double> traffic_bps, const EdgeConfig& cfg) {
  const double sum = std::accumulate(traffic_bps.begin(), traffic_bps.end(), 0.0);
  return sum / cfg.processing_rate(cfg.f_max);
}

ConflictInfo detect_conflict(std::span<const double> actions,
                             std::span<const double> f_th, double f_max) {
  if (actions.size() != f_th.size())
    throw ContractViolation("one action per slice required");
  ConflictInfo info;
  double sum = 0.0;
  for (double a : actions) {
    if (!(a >= 0.0)) throw ContractViolation("allocations must be >= 0");
    sum += a;
  }
  info.conflict = sum > f_max;
  if (info.conflict) {
    for (std::size_t k = 0; k < actions.size(); ++k)
      if (actions[k] > f_th[k]) info.violators.push_back(static_cast<int>(k));
  }
  return info;
}

double compute_reward(int k, const ConflictInfo& conflict, double latency_s,
                      const RewardParams& params) {
  if (!(latency_s >= 0.0)) throw ContractViolation("latency must be >= 0");
  if (conflict.conflict && conflict.is_violator(k)) return 0.0 - params.theta;
  // Floor keeps the non-penalty branch strictly positive for huge latencies.
  return params.alpha * std::max(std::exp(-latency_s / params.latency_scale),
                                 std::numeric_limits<double>::min());
}

}  // namespace slicing
