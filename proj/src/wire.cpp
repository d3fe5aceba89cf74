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

#include "slicing/wire.hpp"

#include <set>

#include "slicing/error.hpp"
#include "slicing/format.hpp"

namespace slicing {
namespace {

bool needs_escape(char c) {
  return c == '%' || c == '|' || c == ';' || c == '=' || c == '\n' || c == '\r';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

// A slice of the record with its 1-based starting byte position.
struct Field {
  std::string_view text;
  std::size_t pos;
};

[[noreturn]] void fail(const std::string& what, std::size_t pos) {
  throw ParseError("wire: " + what + " at offset " + std::to_string(pos), 1, pos);
}

std::vector<Field> split(std::string_view s, char sep, std::size_t pos) {
  std::vector<Field> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back({s.substr(start, i - start), pos + start});
      start = i + 1;
    }
  }
  return out;
}

template <typename Int>
Int int_field(const Field& f, const char* name) {
  auto v = parse_integer<Int>(f.text);
  if (!v) fail(std::string("invalid integer for ") + name, f.pos);
  return *v;
}

double real_field(const Field& f, const char* name) {
  auto v = parse_real<double>(f.text);
  if (!v) fail(std::string("invalid number for ") + name, f.pos);
  return *v;
}

bool bool_field(const Field& f, const char* name) {
  if (f.text == "0") return false;
  if (f.text == "1") return true;
  fail(std::string("expected 0 or 1 for ") + name, f.pos);
}

void append_body(std::string& out, const Payload& payload) {
  auto kv = [&out](std::string_view key, const std::string& value) {
    if (!out.empty() && out.back() != '|') out += ';';
    out.append(key);
    out += '=';
    out += value;
  };
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, ObservationBody>) {
          kv("traffic", format_double(b.norm_traffic));
          kv("gap", format_double(b.cpu_gap));
        } else if constexpr (std::is_same_v<T, MessageBody>) {
          kv("symbol", std::to_string(b.symbol));
        } else if constexpr (std::is_same_v<T, ActionBody>) {
          kv("action", std::to_string(b.action_index));
          kv("message", std::to_string(b.message_index));
          kv("alloc", format_double(b.allocation));
        } else if constexpr (std::is_same_v<T, RewardBody>) {
          kv("reward", format_double(b.reward));
          kv("conflict", b.conflict ? "1" : "0");
          kv("violator", b.violator ? "1" : "0");
        } else {
          kv("name", escape_field(b.name));
          kv("value", format_double(b.value));
          kv("index", std::to_string(b.index));
          for (const auto& [k, v] : b.labels) kv("label." + escape_field(k), escape_field(v));
        }
      },
      payload);
}

Payload decode_body(const Field& kind_field, const Field& body) {
  const std::string_view kind = kind_field.text;
  Payload payload;
  if (kind == "obs") payload = ObservationBody{};
  else if (kind == "msg") payload = MessageBody{};
  else if (kind == "action") payload = ActionBody{};
  else if (kind == "reward") payload = RewardBody{};
  else if (kind == "metric") payload = MetricBody{};
  else fail("unknown kind '" + std::string(kind) + "'", kind_field.pos);

  if (body.text.empty()) return payload;
  std::set<std::string_view> seen;
  for (const Field& pair : split(body.text, ';', body.pos)) {
    const auto eq = pair.text.find('=');
    if (eq == std::string_view::npos) fail("expected key=value", pair.pos);
    const std::string_view key = pair.text.substr(0, eq);
    const Field value{pair.text.substr(eq + 1), pair.pos + eq + 1};
    const bool is_label = key.rfind("label.", 0) == 0;
    if (!is_label && !seen.insert(key).second) fail("duplicate key '" + std::string(key) + "'", pair.pos);
    auto unknown = [&] { fail("unknown key '" + std::string(key) + "' for kind " + std::string(kind), pair.pos); };
    std::visit(
        [&](auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, ObservationBody>) {
            if (key == "traffic") b.norm_traffic = real_field(value, "traffic");
            else if (key == "gap") b.cpu_gap = real_field(value, "gap");
            else unknown();
          } else if constexpr (std::is_same_v<T, MessageBody>) {
            if (key == "symbol") b.symbol = int_field<int>(value, "symbol");
            else unknown();
          } else if constexpr (std::is_same_v<T, ActionBody>) {
            if (key == "action") b.action_index = int_field<int>(value, "action");
            else if (key == "message") b.message_index = int_field<int>(value, "message");
            else if (key == "alloc") b.allocation = real_field(value, "alloc");
            else unknown();
          } else if constexpr (std::is_same_v<T, RewardBody>) {
            if (key == "reward") b.reward = real_field(value, "reward");
            else if (key == "conflict") b.conflict = bool_field(value, "conflict");
            else if (key == "violator") b.violator = bool_field(value, "violator");
            else unknown();
          } else {
            if (key == "name") b.name = unescape_field(value.text, value.pos);
            else if (key == "value") b.value = real_field(value, "value");
            else if (key == "index") b.index = int_field<std::int64_t>(value, "index");
            else if (is_label)
              b.labels.emplace_back(unescape_field(key.substr(6), pair.pos + 6),
                                    unescape_field(value.text, value.pos));
            else unknown();
          }
        },
        payload);
  }
  return payload;
}

}  // namespace

std::string escape_field(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (needs_escape(c)) {
      const auto u = static_cast<unsigned char>(c);
      out += '%';
      out += kHex[u >> 4];
      out += kHex[u & 0xF];
    } else {
      out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s, std::size_t offset_base) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out += s[i];
      continue;
    }
    if (i + 2 >= s.size()) fail("truncated escape", offset_base + i);
    const int hi = hex_value(s[i + 1]);
    const int lo = hex_value(s[i + 2]);
    if (hi < 0 || lo < 0) fail("invalid escape", offset_base + i);
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

std::string encode_wire(const Envelope& e) {
  std::string out = escape_field(e.topic);
  out += '|';
  out += std::to_string(e.seq);
  out += '|';
  out += escape_field(e.sender);
  out += '|';
  out += std::to_string(e.step);
  out += '|';
  out += payload_kind(e.payload);
  out += '|';
  append_body(out, e.payload);
  out += '\n';
  return out;
}

Envelope decode_wire(std::string_view record) {
  if (!record.empty() && record.back() == '\n') record.remove_suffix(1);
  const auto fields = split(record, '|', 1);
  if (fields.size() != 6) {
    const std::size_t pos = fields.size() < 6 ? record.size() + 1 : fields[6].pos - 1;
    fail("expected 6 fields, found " + std::to_string(fields.size()), pos);
  }
  Envelope e;
  if (fields[0].text.empty()) fail("empty topic", fields[0].pos);
  e.topic = unescape_field(fields[0].text, fields[0].pos);
  e.seq = int_field<std::uint64_t>(fields[1], "seq");
  e.sender = unescape_field(fields[2].text, fields[2].pos);
  e.step = int_field<std::int64_t>(fields[3], "step");
  if (e.step < 0) fail("step must be >= 0", fields[3].pos);
  e.payload = decode_body(fields[4], fields[5]);
  return e;
}

std::vector<Envelope> decode_wire_stream(std::string_view text) {
  std::vector<Envelope> out;
  std::size_t line = 1;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    try {
      out.push_back(decode_wire(text.substr(start, end - start)));
    } catch (const ParseError& err) {
      throw ParseError(err.what(), line, err.offset());
    }
    start = end + 1;
    ++line;
  }
  return out;
}

}  // namespace slicing
