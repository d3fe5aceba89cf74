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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string output;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "slicing_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Result run(const std::string& args) {
  const fs::path log = work_dir() / "last_output.txt";
  const std::string cmd = std::string("'") + SLICING_CLI_PATH + "' " + args + " > '" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  Result r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.output = read_file(log);
  return r;
}

std::string desk() { return std::string(SLICING_CONFIG_DIR) + "/desk.cfg"; }

std::string quick(const std::string& out, int episodes = 3, int steps = 20) {
  return "-c '" + desk() + "' -e " + std::to_string(episodes) + " --steps " + std::to_string(steps) +
         " --set agent.hidden=16 --set agent.batch=16 -o '" +
         (work_dir() / out).string() + "'";
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("missing config names the path") {
  const Result r = run("train -c /nonexistent/where.cfg -o '" + (work_dir() / "none").string() + "'");
  CHECK(r.status != 0);
  CHECK(r.output.find("/nonexistent/where.cfg") != std::string::npos);
}

TEST_CASE("validation failures name the key") {
  Result r = run("train " + quick("bad1") + " --set edge.f_max=-1");
  CHECK(r.status == 2);
  CHECK(r.output.find("edge.f_max") != std::string::npos);
  r = run("train " + quick("bad2") + " --set agent.gama=0.5");
  CHECK(r.status == 2);
  CHECK(r.output.find("agent.gama") != std::string::npos);
  r = run("train " + quick("bad3") + " --set agent.gamma=lots");
  CHECK(r.status == 2);
  CHECK(r.output.find("agent.gamma") != std::string::npos);
}

TEST_CASE("train writes its artifacts and a reproducible manifest") {
  const Result a = run("train " + quick("train_a") + " -v ma-ib --seed 7");
  REQUIRE_MESSAGE(a.status == 0, a.output);
  const Result b = run("train " + quick("train_b") + " -v ma-ib --seed 7");
  REQUIRE_MESSAGE(b.status == 0, b.output);
  const fs::path da = work_dir() / "train_a";
  for (int k = 0; k < 3; ++k) CHECK(fs::exists(da / "checkpoints" / ("agent-" + std::to_string(k) + ".ckpt")));
  CHECK(count_lines(read_file(da / "episodes.csv")) == 1 + 3);
  CHECK(count_lines(read_file(da / "records.csv")) == 1 + 3 * 20 * 3);
  CHECK(read_file(da / "metrics.prom").find("# TYPE slicing_conflict_rate gauge") != std::string::npos);
  const std::string manifest = read_file(da / "manifest.txt");
  CHECK(manifest.find("artifact records.csv") != std::string::npos);
  CHECK(manifest == read_file(work_dir() / "train_b" / "manifest.txt"));

  SUBCASE("replay reproduces the step records") {
    const fs::path replayed = work_dir() / "replayed.csv";
    const Result r = run("replay --run '" + da.string() + "' -o '" + replayed.string() + "'");
    REQUIRE_MESSAGE(r.status == 0, r.output);
    CHECK(read_file(replayed) == read_file(da / "records.csv"));
  }
  SUBCASE("evaluate runs from the checkpoints") {
    const Result r = run("evaluate " + quick("eval") + " -v ma-ib --checkpoint '" + (da / "checkpoints").string() + "'");
    REQUIRE_MESSAGE(r.status == 0, r.output);
    CHECK(fs::exists(work_dir() / "eval" / "latency_cdf.csv"));
    const Result wrong = run("evaluate " + quick("eval2") + " -v ma-vanilla --checkpoint '" +
                             (da / "checkpoints").string() + "'");
    CHECK(wrong.status == 2);
  }
  SUBCASE("export converts the episode CSV") {
    const fs::path prom = work_dir() / "export.prom";
    const Result r = run("export --csv '" + (da / "records.csv").string() + "' -o '" + prom.string() + "'");
    REQUIRE_MESSAGE(r.status == 0, r.output);
    const std::string text = read_file(prom);
    CHECK(text.rfind("# episode 0\n", 0) == 0);
    CHECK(text.find("# episode 2\n") != std::string::npos);
  }
}

TEST_CASE("evaluate from a fresh untrained checkpoint") {
  const Result t = run("train " + quick("fresh", 1, 1) + " -v ma-applied");
  REQUIRE_MESSAGE(t.status == 0, t.output);
  const Result r = run("evaluate " + quick("fresh_eval") + " -v ma-applied --checkpoint '" +
                       (work_dir() / "fresh" / "checkpoints").string() + "'");
  CHECK_MESSAGE(r.status == 0, r.output);
}

TEST_CASE("compare writes one grid row per variant") {
  const Result r = run("compare " + quick("cmp") + " --variants ma-vanilla,static-baseline");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  CHECK(count_lines(read_file(work_dir() / "cmp" / "conflict_grid.csv")) == 3);
  CHECK(count_lines(read_file(work_dir() / "cmp" / "utilization_grid.csv")) == 3);
  CHECK(read_file(work_dir() / "cmp" / "summary.txt").find("static-baseline") != std::string::npos);
}

TEST_CASE("export of an empty CSV names the file") {
  const fs::path empty = work_dir() / "empty.csv";
  std::ofstream(empty).close();
  const Result r = run("export --csv '" + empty.string() + "'");
  CHECK(r.status != 0);
  CHECK(r.output.find(empty.string()) != std::string::npos);
  const Result missing = run("export --csv '" + (work_dir() / "nope.csv").string() + "'");
  CHECK(missing.status != 0);
  CHECK(missing.output.find("nope.csv") != std::string::npos);
}

TEST_CASE("output directory defaults from the environment") {
  const fs::path out = work_dir() / "from_env";
  const std::string cmd = "SLICING_OUT_DIR='" + out.string() + "' '" + SLICING_CLI_PATH + "' train -c '" + desk() +
                          "' -e 1 --steps 5 -v static-baseline > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(out / "manifest.txt"));
}
