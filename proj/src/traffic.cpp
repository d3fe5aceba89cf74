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

#include "slicing/traffic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "slicing/error.hpp"

namespace slicing {

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void TrafficProfile::validate() const {
  if (!(sigma >= 0.0)) throw ContractViolation("traffic sigma must be >= 0");
  if (packet_bits <= 0) throw ContractViolation("packet size must be > 0");
  if (!std::isfinite(mu)) throw ContractViolation("traffic mu must be finite");
}

double sample_rate(const TrafficProfile& profile, Rng& rng) {
  const double draw = profile.mu + profile.sigma * standard_normal(rng);
  return std::max(draw, 0.0);
}

std::int64_t sample_poisson(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  if (mean > kPoissonInversionLimit) {
    const double x = std::round(mean + std::sqrt(mean) * standard_normal(rng));
    return static_cast<std::int64_t>(std::max(x, 0.0));
  }
  // Sequential-search inversion of the CDF.
  const double u = uniform01(rng);
  double p = std::exp(-mean);
  double cdf = p;
  std::int64_t k = 0;
  while (u > cdf) {
    ++k;
    p *= mean / static_cast<double>(k);
    const double next = cdf + p;
    if (next == cdf) break;  // tail exhausted in double precision
    cdf = next;
  }
  return k;
}

ArrivalSample sample_arrivals(const TrafficProfile& profile, double tau,
                              Rng& rng) {
  if (!(tau > 0.0)) throw ContractViolation("tau must be > 0");
  ArrivalSample s;
  s.rate = sample_rate(profile, rng);
  s.count = sample_poisson(s.rate * tau, rng);
  s.bits = static_cast<double>(s.count) * static_cast<double>(profile.packet_bits);
  return s;
}

double truncated_rate_mean(double mu, double sigma) {
  if (sigma <= 0.0) return std::max(mu, 0.0);
  const double z = mu / sigma;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return mu * cdf + sigma * pdf;
}

TraceSource::TraceSource(std::vector<TraceRow> rows, double granularity)
    : rows_(std::move(rows)), granularity_(granularity) {
  for (const auto& r : rows_) index_[{r.slice, r.step}] = r.bits;
}

double TraceSource::bits_at(std::int64_t step, int slice) const {
  auto it = index_.find({slice, step});
  return it == index_.end() ? 0.0 : it->second;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

template <typename T>
T parse_field(const std::string& field, std::size_t line, const char* name) {
  std::istringstream in(field);
  T value{};
  in >> value;
  if (in.fail() || !in.eof())
    throw ParseError("trace line " + std::to_string(line) + ": bad " + name +
                         " '" + field + "'",
                     line);
  return value;
}

}  // namespace

TraceSource parse_trace(const std::string& text, double granularity) {
  if (!(granularity > 0.0)) throw ContractViolation("trace granularity must be > 0");
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<TraceRow> rows;
  std::map<int, std::int64_t> last_step;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (trim(line) != "step,slice,bits")
        throw ParseError("trace line 1: header must be 'step,slice,bits'", lineno);
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 3)
      throw ParseError("trace line " + std::to_string(lineno) +
                           ": expected 3 fields, got " + std::to_string(fields.size()),
                       lineno);
    TraceRow row;
    row.step = parse_field<std::int64_t>(fields[0], lineno, "step");
    row.slice = parse_field<int>(fields[1], lineno, "slice");
    row.bits = parse_field<double>(fields[2], lineno, "bits");
    if (row.step < 0 || row.slice < 0)
      throw ValidationError("trace line " + std::to_string(lineno) +
                            ": step and slice must be >= 0");
    if (!(row.bits >= 0.0) || !std::isfinite(row.bits))
      throw ValidationError("trace line " + std::to_string(lineno) +
                            ": bits must be finite and >= 0");
    auto it = last_step.find(row.slice);
    if (it != last_step.end() && row.step <= it->second)
      throw ValidationError("trace line " + std::to_string(lineno) + ": step " +
                            std::to_string(row.step) +
                            " not increasing for slice " + std::to_string(row.slice));
    last_step[row.slice] = row.step;
    rows.push_back(row);
  }
  if (!header_seen) throw ParseError("trace is missing the 'step,slice,bits' header", 1);
  return TraceSource(std::move(rows), granularity);
}

TraceSource load_trace(const std::filesystem::path& path, double granularity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trace file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str(), granularity);
}

}  // namespace slicing
