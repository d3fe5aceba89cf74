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

// Text wire format for envelopes. One UTF-8 record per line:
//
//   topic|seq|sender|step|kind|body\n
//
// `body` is `key=value` pairs joined by ';', in a fixed order per kind:
//
//   obs     traffic=<real>;gap=<real>
//   msg     symbol=<int>
//   action  action=<int>;message=<int>;alloc=<real>
//   reward  reward=<real>;conflict=<0|1>;violator=<0|1>
//   metric  name=<str>;value=<real>;index=<int>[;label.<key>=<str>]...
//
// Reals use the shortest round-trip decimal form. In topic, sender and string
// values the bytes '%', '|', ';', '=', '\n' and '\r' are written as %XX.

#ifndef SLICING_WIRE_HPP_
#define SLICING_WIRE_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "slicing/bus.hpp"

namespace slicing {

// Record including the trailing newline.
std::string encode_wire(const Envelope& envelope);

// Accepts a record with or without its trailing newline. Throws ParseError
// whose offset() is the 1-based byte position of the problem.
Envelope decode_wire(std::string_view record);

// Splits a newline-delimited stream and decodes each record.
std::vector<Envelope> decode_wire_stream(std::string_view text);

std::string escape_field(std::string_view s);
std::string unescape_field(std::string_view s, std::size_t offset_base = 0);

}  // namespace slicing

#endif  // SLICING_WIRE_HPP_
