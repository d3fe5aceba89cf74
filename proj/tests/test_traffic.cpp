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

#include <cmath>
#include <vector>

#include "slicing/error.hpp"
#include "slicing/random.hpp"
#include "slicing/traffic.hpp"

using namespace slicing;

TEST_CASE("sample_rate degenerate profiles") {
  Rng rng(1);
  CHECK(sample_rate({100.0, 0.0, 1}, rng) == 100.0);
  CHECK(sample_rate({-5.0, 0.0, 1}, rng) == 0.0);
}

TEST_CASE("sample_rate matches the truncated normal mean") {
  Rng rng(7);
  const TrafficProfile p{50.0, 20.0, 1};
  const int n = 1'000'000;
  double sum = 0.0;
  double lowest = 1.0;
  for (int i = 0; i < n; ++i) {
    const double r = sample_rate(p, rng);
    lowest = std::min(lowest, r);
    sum += r;
  }
  CHECK(lowest >= 0.0);
  const double expected = truncated_rate_mean(50.0, 20.0);
  CHECK(std::abs(sum / n - expected) / expected < 0.005);
}

TEST_CASE("truncated_rate_mean closed form") {
  CHECK(truncated_rate_mean(3.0, 0.0) == 3.0);
  CHECK(truncated_rate_mean(-3.0, 0.0) == 0.0);
  // E[max(X,0)] for a standard normal is 1/sqrt(2 pi).
  CHECK(truncated_rate_mean(0.0, 1.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
}

TEST_CASE("sample_arrivals at zero rate") {
  Rng rng(3);
  const ArrivalSample s = sample_arrivals({0.0, 0.0, 1500}, 0.01, rng);
  CHECK(s.rate == 0.0);
  CHECK(s.count == 0);
  CHECK(s.bits == 0.0);
}

TEST_CASE("sample_arrivals mean bits") {
  Rng rng(11);
  const TrafficProfile p{1000.0, 0.0, 1500};
  const int n = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const ArrivalSample s = sample_arrivals(p, 0.01, rng);
    CHECK_EQ(s.bits, double(s.count) * 1500.0);
    sum += s.bits;
  }
  CHECK(std::abs(sum / n - 15000.0) / 15000.0 < 0.01);
}

TEST_CASE("bits are count times packet size") {
  Rng rng(5);
  const TrafficProfile p{700.0, 0.0, 32};
  for (int i = 0; i < 1000; ++i) {
    const ArrivalSample s = sample_arrivals(p, 0.01, rng);
    CHECK(s.bits == double(s.count) * 32.0);
    if (s.count == 7) CHECK(s.bits == 224.0);
  }
}

TEST_CASE("sample_arrivals rejects a non-positive tau") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_arrivals({1.0, 0.0, 1}, 0.0, rng), ContractViolation);
}

TEST_CASE("poisson counts match mean and variance within 3 sigma") {
  for (double mean : {0.5, 4.0, 60.0, 800.0}) {
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(mean * 10)}));
    const int n = 100'000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = double(sample_poisson(mean, rng));
      CHECK(c >= 0.0);
      s += c;
      s2 += c * c;
    }
    const double m = s / n;
    const double var = s2 / n - m * m;
    CAPTURE(mean);
    CHECK(std::abs(m - mean) < 3.0 * std::sqrt(mean / n));
    // Sample variance of a Poisson has std ~ sqrt((mean + 2 mean^2) / n).
    CHECK(std::abs(var - mean) < 3.0 * std::sqrt((mean + 2.0 * mean * mean) / n));
  }
}

TEST_CASE("arrival sequence is reproducible for a fixed seed") {
  const TrafficProfile p{23400.0, 4680.0, 32};
  Rng a(derive_seed(42, {1, 2})), b(derive_seed(42, {1, 2}));
  for (int i = 0; i < 10'000; ++i) {
    const ArrivalSample x = sample_arrivals(p, 0.01, a);
    const ArrivalSample y = sample_arrivals(p, 0.01, b);
    REQUIRE(x.rate == y.rate);
    REQUIRE(x.count == y.count);
  }
}

TEST_CASE("trace parsing") {
  SUBCASE("three rows") {
    const TraceSource t = parse_trace("step,slice,bits\n0,0,1500\n1,0,3000\n0,1,64\n", 0.01);
    CHECK(t.size() == 3);
    CHECK(t.bits_at(1, 0) == 3000.0);
    CHECK(t.bits_at(0, 1) == 64.0);
    CHECK(t.bits_at(5, 2) == 0.0);
  }
  SUBCASE("header only") {
    CHECK(parse_trace("step,slice,bits\n", 0.01).size() == 0);
  }
  SUBCASE("negative bits name the row") {
    try {
      parse_trace("step,slice,bits\n0,0,10\n1,0,-4\n", 0.01);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("malformed row carries its line") {
    try {
      parse_trace("step,slice,bits\n0,0\n", 0.01);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("non-monotone steps") {
    CHECK_THROWS_AS(parse_trace("step,slice,bits\n3,0,1\n3,0,2\n", 0.01), ValidationError);
  }
  SUBCASE("wrong header") {
    CHECK_THROWS_AS(parse_trace("a,b,c\n", 0.01), ParseError);
  }
}
