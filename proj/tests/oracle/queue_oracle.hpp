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

// Reference model of the slice queueing system written without the library:
// plain loops over doubles, its own random helpers. Tests compare the library
// against it.

#ifndef SLICING_TESTS_ORACLE_QUEUE_ORACLE_HPP_
#define SLICING_TESTS_ORACLE_QUEUE_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

struct Params {
  double f_max = 40.0;
  double U = 1e-4;
  double tau = 0.01;
  double dt = 0.01;
  double cycles = 1e9;
  bool literal_ran = false;
  bool literal_latency = false;
  double theta = 1.0;
  double alpha = 1.0;
  double scale = 0.05;
};

struct Slice {
  double f_th = 15.0;
  double capacity = 1e7;
  double mu = 0.0;
  double sigma = 0.0;
  std::int64_t packet = 1500;
};

struct Queue {
  double qe = 0.0, qr = 0.0;
  double sum_qe = 0.0, sum_qr = 0.0, sum_arrivals = 0.0;
  std::int64_t n = 0;
};

struct StepOut {
  double processed = 0.0;
  double transmitted = 0.0;
  double latency_edge = 0.0;
  double latency_ran = 0.0;
  double latency = 0.0;
};

// Edge and RAN updates, running sums, long-term latency for one slice.
inline StepOut step(Queue& q, double arrival, double f, double C, const Params& p) {
  StepOut o;
  const double ue = p.tau * f * p.cycles * p.U;
  const double ur = p.dt * C;
  o.processed = q.qe < ue ? q.qe : ue;
  const double qe_next = (q.qe - ue > 0.0 ? q.qe - ue : 0.0) + arrival;
  double inflow = o.processed;
  if (p.literal_ran) inflow = q.qr < ue ? q.qr : ue;
  o.transmitted = q.qr < ur ? q.qr : ur;
  const double qr_next = (q.qr - ur > 0.0 ? q.qr - ur : 0.0) + inflow;
  q.qe = qe_next;
  q.qr = qr_next;
  q.sum_qe += q.qe;
  q.sum_qr += q.qr;
  q.sum_arrivals += arrival;
  q.n += 1;
  const double mean_rate = q.sum_arrivals / (double(q.n) * p.tau);
  const double avg_e = q.sum_qe / double(q.n);
  const double avg_r = q.sum_qr / double(q.n);
  if (p.literal_latency) {
    o.latency_edge = mean_rate * avg_e;
    o.latency_ran = mean_rate * avg_r;
  } else if (mean_rate > 0.0) {
    o.latency_edge = avg_e / mean_rate;
    o.latency_ran = avg_r / mean_rate;
  }
  o.latency = o.latency_edge + o.latency_ran;
  return o;
}

// --- random streams ---------------------------------------------------------

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t slice_seed(std::uint64_t episode_seed, std::uint64_t k) {
  std::uint64_t s = splitmix(episode_seed);
  s = splitmix(s ^ splitmix(0x7261ULL + 0x632be59bd9b4e019ULL));
  s = splitmix(s ^ splitmix(k + 0x632be59bd9b4e019ULL));
  return s;
}

struct Stream {
  std::mt19937_64 g;
  explicit Stream(std::uint64_t seed) : g(seed) {}
  double u() { return double(g() >> 11) * (1.0 / 9007199254740992.0); }
  double normal() {
    double a = u();
    const double b = u();
    if (a <= 0.0) a = 1.0 / 9007199254740992.0;
    return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * 3.14159265358979323846 * b);
  }
  std::int64_t poisson(double m) {
    if (!(m > 0.0)) return 0;
    if (m > 500.0) {
      const double x = std::round(m + std::sqrt(m) * normal());
      return x > 0.0 ? std::int64_t(x) : 0;
    }
    const double v = u();
    double pk = std::exp(-m), cdf = pk;
    std::int64_t k = 0;
    while (v > cdf) {
      ++k;
      pk *= m / double(k);
      if (cdf + pk == cdf) break;
      cdf += pk;
    }
    return k;
  }
  // Truncated-normal rate, then a Poisson packet count, in bits.
  double arrival_bits(const Slice& s, double tau) {
    double rate = s.mu + s.sigma * normal();
    if (rate < 0.0) rate = 0.0;
    return double(poisson(rate * tau)) * double(s.packet);
  }
};

// --- full multi-slice trajectory --------------------------------------------

struct Row {
  double arrival = 0.0;
  double allocation = 0.0;
  double qe = 0.0, qr = 0.0;
  double processed = 0.0, transmitted = 0.0;
  double latency = 0.0;
  double utilization = 0.0;
  double reward = 0.0;
  bool conflict = false;
};

// `actions[t][k]` are requested allocations.
inline std::vector<std::vector<Row>> trajectory(const Params& p, const std::vector<Slice>& slices,
                                                const std::vector<std::vector<double>>& actions,
                                                std::uint64_t episode_seed) {
  const std::size_t K = slices.size();
  std::vector<Stream> streams;
  for (std::size_t k = 0; k < K; ++k) streams.emplace_back(slice_seed(episode_seed, k));
  std::vector<Queue> q(K);
  std::vector<std::vector<Row>> out;
  for (const auto& a : actions) {
    double total = 0.0;
    for (double x : a) total += x;
    const bool conflict = total > p.f_max;
    std::vector<Row> rows(K);
    for (std::size_t k = 0; k < K; ++k) {
      Row& r = rows[k];
      const bool violator = conflict && a[k] > slices[k].f_th;
      r.conflict = conflict;
      r.allocation = violator ? slices[k].f_th : a[k];
      r.arrival = streams[k].arrival_bits(slices[k], p.tau);
      const StepOut o = step(q[k], r.arrival, r.allocation, slices[k].capacity, p);
      r.qe = q[k].qe;
      r.qr = q[k].qr;
      r.processed = o.processed;
      r.transmitted = o.transmitted;
      r.latency = o.latency;
      r.utilization = r.allocation > 0.0 ? (r.arrival / p.tau) / (p.U * (r.allocation * p.cycles)) : 0.0;
      r.reward = violator ? -p.theta
                           : p.alpha * std::max(std::exp(-o.latency / p.scale), 2.2250738585072014e-308);
    }
    out.push_back(std::move(rows));
  }
  return out;
}

}  // namespace oracle

#endif  // SLICING_TESTS_ORACLE_QUEUE_ORACLE_HPP_
