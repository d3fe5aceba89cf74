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

#include "slicing/environment.hpp"

#include <numeric>
#include <ostream>

#include "slicing/error.hpp"
#include "slicing/format.hpp"

namespace slicing {

std::vector<double> Scenario::shares() const {
  std::vector<double> out;
  out.reserve(slices.size());
  for (const auto& s : slices) out.push_back(s.f_th);
  return out;
}

double Scenario::traffic_normalizer(std::size_t k) const {
  if (k < traffic_norm.size()) return traffic_norm[k];
  return norm_factor * edge.processing_rate(slices[k].f_th);
}

std::string Scenario::validate() const {
  edge.validate();
  reward.validate();
  if (slices.empty()) throw ContractViolation("scenario needs at least one slice");
  double share_sum = 0.0;
  for (const auto& s : slices) {
    if (!(s.f_th > 0.0)) throw ContractViolation("slice share f_th must be > 0");
    if (!(s.channel_capacity >= 0.0)) throw ContractViolation("channel capacity must be >= 0");
    for (double c : s.capacity_series)
      if (!(c >= 0.0)) throw ContractViolation("channel capacity must be >= 0");
    s.traffic.validate();
    share_sum += s.f_th;
  }
  for (double n : traffic_norm)
    if (!(n > 0.0)) throw ContractViolation("traffic normalizer must be > 0");
  if (!(norm_factor > 0.0)) throw ContractViolation("norm_factor must be > 0");
  if (!(latency_threshold > 0.0)) throw ContractViolation("latency threshold must be > 0");
  if (share_sum > edge.f_max)
    return "sum of slice shares " + format_double(share_sum) + " exceeds f_max " +
           format_double(edge.f_max);
  return {};
}

namespace {

template <typename T>
std::vector<T> per_slice(const std::vector<T>& values, std::size_t k,
                         const std::string& key) {
  if (values.size() == 1 && k > 1) return std::vector<T>(k, values[0]);
  if (values.size() != k)
    throw ConfigError(key, "expected " + std::to_string(k) + " values, got " +
                               std::to_string(values.size()));
  return values;
}

}  // namespace

Scenario Scenario::from_config(const KeyValueConfig& cfg) {
  Scenario s;
  s.edge.f_max = cfg.get_double("edge.f_max", s.edge.f_max);
  s.edge.bits_per_cycle = cfg.get_double("edge.bits_per_cycle", s.edge.bits_per_cycle);
  s.edge.tau = cfg.get_double("edge.tau", s.edge.tau);
  s.edge.delta_t = cfg.get_double("edge.delta_t", s.edge.tau);
  s.edge.cycles_per_unit = cfg.get_double("edge.cycles_per_unit", s.edge.cycles_per_unit);

  const auto shares = cfg.get_doubles("slices.f_th", {15.0, 15.0, 10.0});
  const std::size_t k = shares.size();
  if (k == 0) throw ConfigError("slices.f_th", "at least one slice required");
  std::vector<std::string> names;
  if (cfg.has("slices.names"))
    names = per_slice(cfg.get_strings("slices.names", {}), k, "slices.names");
  const auto capacity = per_slice(cfg.get_doubles("slices.channel_capacity", {1e7}), k,
                                  "slices.channel_capacity");
  const auto mu = per_slice(cfg.get_doubles("traffic.mu", {0.0}), k, "traffic.mu");
  const auto sigma = per_slice(cfg.get_doubles("traffic.sigma", {0.0}), k, "traffic.sigma");
  const auto packets = per_slice(cfg.get_ints("traffic.packet_bits", {1500}), k,
                                 "traffic.packet_bits");
  for (std::size_t i = 0; i < k; ++i) {
    SliceConfig sc;
    sc.id = static_cast<int>(i);
    sc.name = names.empty() ? "slice" + std::to_string(i) : names[i];
    sc.f_th = shares[i];
    sc.channel_capacity = capacity[i];
    sc.capacity_series =
        cfg.get_doubles("slices.capacity_series." + std::to_string(i), {});
    sc.traffic.mu = mu[i];
    sc.traffic.sigma = sigma[i];
    sc.traffic.packet_bits = packets[i];
    if (!(sc.f_th > 0.0)) throw ConfigError("slices.f_th", "shares must be > 0");
    if (sc.traffic.sigma < 0.0) throw ConfigError("traffic.sigma", "must be >= 0");
    if (sc.traffic.packet_bits <= 0) throw ConfigError("traffic.packet_bits", "must be > 0");
    if (sc.channel_capacity < 0.0)
      throw ConfigError("slices.channel_capacity", "must be >= 0");
    s.slices.push_back(std::move(sc));
  }
  if (cfg.has("traffic.norm"))
    s.traffic_norm = per_slice(cfg.get_doubles("traffic.norm", {}), k, "traffic.norm");
  s.norm_factor = cfg.get_double("traffic.norm_factor", s.norm_factor);

  s.reward.theta = cfg.get_double("reward.theta", s.reward.theta);
  s.reward.alpha = cfg.get_double("reward.alpha", s.reward.alpha);
  s.reward.latency_scale = cfg.get_double("reward.latency_scale", s.reward.latency_scale);

  try {
    s.ran_mode = parse_ran_mode(cfg.get_string("env.ran_mode", "corrected"));
  } catch (const ValidationError& e) {
    throw ConfigError("env.ran_mode", e.what());
  }
  try {
    s.latency_mode = parse_latency_mode(cfg.get_string("env.latency_mode", "little-consistent"));
  } catch (const ValidationError& e) {
    throw ConfigError("env.latency_mode", e.what());
  }
  s.latency_threshold = cfg.get_double("env.latency_threshold", s.latency_threshold);

  const std::string trace_path = cfg.get_string("traffic.trace_path", "");
  if (!trace_path.empty())
    s.trace = std::make_shared<TraceSource>(load_trace(trace_path, s.edge.tau));

  const auto check = [](const char* key, bool ok) {
    if (!ok) throw ConfigError(key, "must be > 0");
  };
  check("edge.f_max", s.edge.f_max > 0.0);
  check("edge.bits_per_cycle", s.edge.bits_per_cycle > 0.0);
  check("edge.tau", s.edge.tau > 0.0);
  check("edge.delta_t", s.edge.delta_t > 0.0);
  check("edge.cycles_per_unit", s.edge.cycles_per_unit > 0.0);
  if (s.reward.theta < 0.0) throw ConfigError("reward.theta", "must be >= 0");
  check("reward.alpha", s.reward.alpha > 0.0);
  check("reward.latency_scale", s.reward.latency_scale > 0.0);
  check("env.latency_threshold", s.latency_threshold > 0.0);
  check("traffic.norm_factor", s.norm_factor > 0.0);
  s.validate();
  return s;
}

SliceEnvironment::SliceEnvironment(Scenario scenario)
    : scenario_(std::move(scenario)) {
  scenario_.validate();
  shares_ = scenario_.shares();
  reset(0);
}

void SliceEnvironment::reset(std::uint64_t episode_seed) {
  const std::size_t k = size();
  queues_.assign(k, QueueState{});
  traffic_rngs_.clear();
  for (std::size_t i = 0; i < k; ++i)
    traffic_rngs_.emplace_back(derive_seed(episode_seed, {0x7261ULL, i}));
  last_traffic_.assign(k, 0.0);
  last_allocation_ = shares_;
  t_ = 0;
}

double SliceEnvironment::draw_arrival_bits(std::size_t k) {
  if (scenario_.trace) return scenario_.trace->bits_at(t_, static_cast<int>(k));
  return sample_arrivals(scenario_.slices[k].traffic, scenario_.edge.tau, traffic_rngs_[k])
      .bits;
}

EnvStepResult SliceEnvironment::step(std::span<const double> requested) {
  const std::size_t k = size();
  if (requested.size() != k)
    throw ContractViolation("expected " + std::to_string(k) + " actions, got " +
                            std::to_string(requested.size()));
  const EdgeConfig& edge = scenario_.edge;

  EnvStepResult result;
  result.step = t_;
  result.conflict = detect_conflict(requested, shares_, edge.f_max);
  result.slices.resize(k);

  for (std::size_t i = 0; i < k; ++i) {
    StepOutcome& out = result.slices[i];
    const int id = static_cast<int>(i);
    out.requested = requested[i];
    out.violator = result.conflict.conflict && result.conflict.is_violator(id);
    out.allocation = out.violator ? shares_[i] : requested[i];

    out.arrival_bits = draw_arrival_bits(i);
    out.traffic_bps = out.arrival_bits / edge.tau;

    const EdgeStep es = step_edge_queue(queues_[i], out.arrival_bits, out.allocation, edge);
    const RanStep rs =
        step_ran_queue(es.state, es.processed, es.edge_capacity,
                       scenario_.slices[i].capacity_at(t_), edge, scenario_.ran_mode);
    queues_[i] = accumulate(rs.state, out.arrival_bits);
    out.processed_edge = es.processed;
    out.transmitted = rs.transmitted;
    out.latency = latency(queues_[i], edge, scenario_.latency_mode);
    out.utilization =
        out.allocation > 0.0
            ? utilization_slice(out.traffic_bps, out.allocation * edge.cycles_per_unit,
                                edge.bits_per_cycle)
            : 0.0;
    out.reward = compute_reward(id, result.conflict, out.latency.total, scenario_.reward);

    last_traffic_[i] = out.traffic_bps;
    last_allocation_[i] = out.allocation;
  }
  ++t_;
  return result;
}

void write_state_csv_header(std::ostream& out) {
  out << "step,slice,allocation,arrival_bits,q_edge,q_ran,processed,transmitted,latency\n";
}

void write_state_csv_rows(std::ostream& out, const EnvStepResult& result,
                          const std::vector<QueueState>& queues) {
  for (std::size_t i = 0; i < result.slices.size(); ++i) {
    const auto& s = result.slices[i];
    out << result.step << ',' << i << ',' << format_double(s.allocation) << ','
        << format_double(s.arrival_bits) << ',' << format_double(queues[i].q_edge) << ','
        << format_double(queues[i].q_ran) << ',' << format_double(s.processed_edge) << ','
        << format_double(s.transmitted) << ',' << format_double(s.latency.total) << '\n';
  }
}

}  // namespace slicing
