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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "slicing/config.hpp"
#include "slicing/error.hpp"

using namespace slicing;

TEST_CASE("typed getters") {
  const KeyValueConfig c = KeyValueConfig::parse(
      "# comment\n a = 1.5 \nb = 7\nc = true\nd = 1, 2 ,3\ne = x,y\nf = hello # trailing\n");
  CHECK(c.get_double("a", 0) == 1.5);
  CHECK(c.get_int("b", 0) == 7);
  CHECK(c.get_bool("c", false));
  CHECK(c.get_doubles("d", {}) == std::vector<double>{1, 2, 3});
  CHECK(c.get_strings("e", {}) == std::vector<std::string>{"x", "y"});
  CHECK(c.get_string("f", "") == "hello");
  CHECK(c.get_int("missing", 42) == 42);
}

TEST_CASE("bad values name their key") {
  const KeyValueConfig c = KeyValueConfig::parse("a = abc\nb = 1.5\nc = maybe\nd = inf\n");
  try {
    (void)c.get_double("a", 0);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "a");
  }
  CHECK_THROWS_AS((void)c.get_int("b", 0), ConfigError);
  CHECK_THROWS_AS((void)c.get_bool("c", false), ConfigError);
  CHECK_THROWS_AS((void)c.get_double("d", 0), ConfigError);
}

TEST_CASE("syntax errors carry a line number") {
  try {
    KeyValueConfig::parse("a = 1\nnot a pair\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse(" = 2\n"), ParseError);
}

TEST_CASE("unconsumed keys are rejected") {
  const KeyValueConfig c = KeyValueConfig::parse("used = 1\ntypo.key = 2\n");
  (void)c.get_int("used", 0);
  try {
    c.check_all_consumed();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "typo.key");
  }
  (void)c.get_int("typo.key", 0);
  CHECK_NOTHROW(c.check_all_consumed());
}

TEST_CASE("canonical form and hash") {
  KeyValueConfig a = KeyValueConfig::parse("b = 2\na = 1\n");
  KeyValueConfig b = KeyValueConfig::parse("# other order\na=1\n\nb=2\n");
  CHECK(a.canonical() == "a=1\nb=2\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  a.set("b", "3");
  CHECK(a.hash() != b.hash());
  // FNV-1a 64 reference values.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("load from disk") {
  const auto path = std::filesystem::temp_directory_path() / "slicing_cfg_test.cfg";
  {
    std::ofstream out(path);
    out << "x = 3\n";
  }
  const KeyValueConfig c = KeyValueConfig::load(path);
  CHECK(c.get_int("x", 0) == 3);
  CHECK(c.origin() == path.string());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(KeyValueConfig::load(path), Error);
}
