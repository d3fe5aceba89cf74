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

// Per-slice packet arrivals: a Poisson process whose rate is redrawn every
// step from a Gaussian truncated at zero, or a replayed trace.

#ifndef SLICING_TRAFFIC_HPP_
#define SLICING_TRAFFIC_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slicing/random.hpp"

namespace slicing {

struct TrafficProfile {
  double mu = 0.0;                // packets/s
  double sigma = 0.0;             // packets/s
  std::int64_t packet_bits = 1;   // bits/packet

  void validate() const;
};

struct ArrivalSample {
  double rate = 0.0;        // packets/s drawn for this step
  std::int64_t count = 0;   // packets this step
  double bits = 0.0;        // count * packet_bits
};

// Above this mean the Poisson draw switches from inversion to a rounded
// normal approximation.
inline constexpr double kPoissonInversionLimit = 500.0;

// max(N(mu, sigma), 0).
double sample_rate(const TrafficProfile& profile, Rng& rng);

std::int64_t sample_poisson(double mean, Rng& rng);

ArrivalSample sample_arrivals(const TrafficProfile& profile, double tau,
                              Rng& rng);

// E[max(X, 0)] for X ~ N(mu, sigma).
double truncated_rate_mean(double mu, double sigma);

struct TraceRow {
  std::int64_t step = 0;
  int slice = 0;
  double bits = 0.0;
};

class TraceSource {
 public:
  TraceSource() = default;
  TraceSource(std::vector<TraceRow> rows, double granularity);

  const std::vector<TraceRow>& rows() const { return rows_; }
  double granularity() const { return granularity_; }
  std::size_t size() const { return rows_.size(); }

  // Arrival bits recorded for (step, slice); 0 when the trace has no row.
  double bits_at(std::int64_t step, int slice) const;

 private:
  std::vector<TraceRow> rows_;
  double granularity_ = 0.01;
  std::map<std::pair<int, std::int64_t>, double> index_;
};

// Parses a `step,slice,bits` CSV. Throws ParseError (with line number) on a
// malformed row, ValidationError on negative bits or non-increasing steps.
TraceSource parse_trace(const std::string& text, double granularity);
TraceSource load_trace(const std::filesystem::path& path, double granularity);

}  // namespace slicing

#endif  // SLICING_TRAFFIC_HPP_
