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

// Gauge registry with text exposition export, plus the empirical CDF and
// smoothing helpers used for reporting.

#ifndef SLICING_METRICS_HPP_
#define SLICING_METRICS_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slicing/bus.hpp"

namespace slicing {

bool valid_metric_name(std::string_view name);
bool valid_label_name(std::string_view name);

struct MetricKey {
  std::string name;
  Labels labels;   // sorted by label name

  friend bool operator==(const MetricKey&, const MetricKey&) = default;
  friend auto operator<=>(const MetricKey&, const MetricKey&) = default;
};

// Sorts labels and validates names. Throws ValidationError.
MetricKey make_metric_key(std::string name, Labels labels);

struct SeriesPoint {
  std::int64_t index = 0;
  double value = 0.0;
  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

// Latest value per series.
using MetricSnapshot = std::map<MetricKey, double>;

// Thread-safe. Every series is a gauge: `record` sets its current value and
// appends the point to the series history.
class MetricsRegistry {
 public:
  // Throws ValidationError on a bad metric or label name or a non-finite
  // value.
  void record(const std::string& name, Labels labels, double value, std::int64_t index = 0);
  void record(const MetricBody& sample) { record(sample.name, sample.labels, sample.value, sample.index); }

  MetricSnapshot snapshot() const;
  std::vector<SeriesPoint> history(const std::string& name, const Labels& labels) const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }

 private:
  mutable std::mutex mu_;
  std::map<MetricKey, std::vector<SeriesPoint>> series_;
};

// For each metric name in order, "# TYPE <name> gauge" then one line per
// label set: `name{k="v",...} value[ timestamp_ms]`. Throws ValidationError
// on an empty snapshot.
std::string export_text(const MetricSnapshot& snapshot,
                        std::optional<std::int64_t> timestamp_ms = std::nullopt);
inline std::string export_text(const MetricsRegistry& registry,
                               std::optional<std::int64_t> timestamp_ms = std::nullopt) {
  return export_text(registry.snapshot(), timestamp_ms);
}

// Inverse of export_text; timestamps are accepted and dropped. Throws
// ParseError with the line number.
MetricSnapshot parse_text(std::string_view text);

struct CdfSeries {
  std::vector<double> values;      // ascending
  std::vector<double> fractions;   // fractions[i] = (i + 1) / n
};

// Throws ValidationError on empty input or a non-finite sample.
CdfSeries cdf(std::span<const double> samples);

// Fraction of samples <= threshold.
double quantile_below(const CdfSeries& series, double threshold);

// Trailing mean over up to `window` points; the first window - 1 outputs
// average the available prefix. Throws ContractViolation if window < 1.
std::vector<double> rolling_mean(std::span<const double> series, std::size_t window);

// Serves `GET <path>` with the registry's current exposition text on a
// background thread.
class MetricsHttpServer {
 public:
  MetricsHttpServer(const MetricsRegistry& registry, const std::string& host, int port,
                    std::string path = "/metrics");
  ~MetricsHttpServer();
  MetricsHttpServer(const MetricsHttpServer&) = delete;
  MetricsHttpServer& operator=(const MetricsHttpServer&) = delete;

  int port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace slicing

#endif  // SLICING_METRICS_HPP_
