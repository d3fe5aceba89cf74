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

#include "slicing/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "slicing/error.hpp"
#include "slicing/format.hpp"

namespace slicing {
namespace {

bool name_char(char c, bool first, bool colon_ok) {
  const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || (colon_ok && c == ':');
  return alpha || (!first && c >= '0' && c <= '9');
}

bool valid_name(std::string_view s, bool colon_ok) {
  if (s.empty()) return false;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!name_char(s[i], i == 0, colon_ok)) return false;
  return true;
}

void append_label_value(std::string& out, std::string_view v) {
  for (char c : v) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
}

class LineParser {
 public:
  LineParser(std::string_view s, std::size_t line) : s_(s), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("metrics line " + std::to_string(line_) + ": " + what, line_, pos_ + 1);
  }
  bool done() const { return pos_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string_view name(bool colon_ok) {
    const std::size_t start = pos_;
    while (!done() && name_char(s_[pos_], pos_ == start, colon_ok)) ++pos_;
    if (pos_ == start) fail("expected a name");
    return s_.substr(start, pos_ - start);
  }
  std::string quoted() {
    expect('"');
    std::string out;
    while (true) {
      if (done()) fail("unterminated label value");
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (done()) fail("dangling escape");
      const char e = s_[pos_++];
      if (e == 'n') out += '\n';
      else if (e == '\\' || e == '"') out += e;
      else fail("unknown escape");
    }
  }
  std::string_view token() {
    const std::size_t start = pos_;
    while (!done() && s_[pos_] != ' ') ++pos_;
    if (pos_ == start) fail("expected a value");
    return s_.substr(start, pos_ - start);
  }

 private:
  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace

bool valid_metric_name(std::string_view name) { return valid_name(name, true); }
bool valid_label_name(std::string_view name) { return valid_name(name, false); }

MetricKey make_metric_key(std::string name, Labels labels) {
  if (!valid_metric_name(name)) throw ValidationError("invalid metric name '" + name + "'");
  for (const auto& [k, v] : labels)
    if (!valid_label_name(k)) throw ValidationError("invalid label name '" + k + "'");
  std::sort(labels.begin(), labels.end());
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i].first == labels[i - 1].first)
      throw ValidationError("duplicate label '" + labels[i].first + "'");
  return {std::move(name), std::move(labels)};
}

void MetricsRegistry::record(const std::string& name, Labels labels, double value,
                             std::int64_t index) {
  if (!std::isfinite(value)) throw ValidationError("metric '" + name + "' value is not finite");
  MetricKey key = make_metric_key(name, std::move(labels));
  std::lock_guard<std::mutex> lock(mu_);
  series_[std::move(key)].push_back({index, value});
}

MetricSnapshot MetricsRegistry::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  MetricSnapshot out;
  for (const auto& [key, points] : series_) out.emplace(key, points.back().value);
  return out;
}

std::vector<SeriesPoint> MetricsRegistry::history(const std::string& name, const Labels& labels) const {
  const MetricKey key = make_metric_key(name, labels);
  std::lock_guard<std::mutex> lock(mu_);
  auto it = series_.find(key);
  return it == series_.end() ? std::vector<SeriesPoint>{} : it->second;
}

std::size_t MetricsRegistry::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return series_.size();
}

std::string export_text(const MetricSnapshot& snapshot, std::optional<std::int64_t> timestamp_ms) {
  if (snapshot.empty()) throw ValidationError("cannot export an empty registry");
  std::string out;
  const std::string* current = nullptr;
  for (const auto& [key, value] : snapshot) {
    if (!valid_metric_name(key.name)) throw ValidationError("invalid metric name '" + key.name + "'");
    if (!std::isfinite(value)) throw ValidationError("metric '" + key.name + "' value is not finite");
    if (!current || *current != key.name) {
      out += "# TYPE " + key.name + " gauge\n";
      current = &key.name;
    }
    out += key.name;
    if (!key.labels.empty()) {
      out += '{';
      for (std::size_t i = 0; i < key.labels.size(); ++i) {
        if (i) out += ',';
        out += key.labels[i].first + "=\"";
        append_label_value(out, key.labels[i].second);
        out += '"';
      }
      out += '}';
    }
    out += ' ';
    out += format_double(value);
    if (timestamp_ms) out += ' ' + std::to_string(*timestamp_ms);
    out += '\n';
  }
  return out;
}

MetricSnapshot parse_text(std::string_view text) {
  MetricSnapshot out;
  std::string declared;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    LineParser p(line, line_no);
    if (line[0] == '#') {
      if (line.rfind("# TYPE ", 0) != 0) continue;
      const std::string_view rest = line.substr(7);
      const auto sp = rest.find(' ');
      if (sp == std::string_view::npos || rest.substr(sp + 1) != "gauge")
        throw ParseError("metrics line " + std::to_string(line_no) + ": only gauges are supported", line_no);
      declared = std::string(rest.substr(0, sp));
      if (!valid_metric_name(declared))
        throw ParseError("metrics line " + std::to_string(line_no) + ": invalid metric name", line_no);
      continue;
    }
    MetricKey key;
    key.name = std::string(p.name(true));
    if (key.name != declared) p.fail("sample for '" + key.name + "' without a TYPE line");
    if (p.peek() == '{') {
      p.expect('{');
      while (p.peek() != '}') {
        std::string label(p.name(false));
        p.expect('=');
        key.labels.emplace_back(std::move(label), p.quoted());
        if (p.peek() == ',') p.expect(',');
        else if (p.peek() != '}') p.fail("expected ',' or '}'");
      }
      p.expect('}');
    }
    p.expect(' ');
    const auto value = parse_real<double>(p.token());
    if (!value || !std::isfinite(*value)) p.fail("invalid sample value");
    if (!p.done()) {
      p.expect(' ');
      if (!parse_integer<std::int64_t>(p.token())) p.fail("invalid timestamp");
      if (!p.done()) p.fail("trailing characters");
    }
    try {
      key = make_metric_key(std::move(key.name), std::move(key.labels));
    } catch (const ValidationError& e) {
      p.fail(e.what());
    }
    if (!out.emplace(std::move(key), *value).second) p.fail("duplicate series");
  }
  return out;
}

CdfSeries cdf(std::span<const double> samples) {
  if (samples.empty()) throw ValidationError("cdf of an empty sample");
  CdfSeries s;
  s.values.assign(samples.begin(), samples.end());
  for (double v : s.values)
    if (!std::isfinite(v)) throw ValidationError("cdf sample is not finite");
  std::sort(s.values.begin(), s.values.end());
  const auto n = static_cast<double>(s.values.size());
  s.fractions.resize(s.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i) s.fractions[i] = static_cast<double>(i + 1) / n;
  s.fractions.back() = 1.0;
  return s;
}

double quantile_below(const CdfSeries& series, double threshold) {
  if (series.values.empty()) return 0.0;
  const auto it = std::upper_bound(series.values.begin(), series.values.end(), threshold);
  if (it == series.values.begin()) return 0.0;
  return series.fractions[static_cast<std::size_t>(it - series.values.begin()) - 1];
}

std::vector<double> rolling_mean(std::span<const double> series, std::size_t window) {
  if (window < 1) throw ContractViolation("rolling window must be >= 1");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= window) sum -= series[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace slicing
