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

// Command-line driver: train, evaluate, compare, replay, export.
//
// Exit codes: 0 success, 1 runtime or I/O error, 2 invalid configuration or
// input, 3 learning diverged, 4 step protocol fault.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slicing/agent.hpp"
#include "slicing/config.hpp"
#include "slicing/environment.hpp"
#include "slicing/error.hpp"
#include "slicing/format.hpp"
#include "slicing/metrics.hpp"
#include "slicing/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace slicing;

namespace {

constexpr const char* kOutEnv = "SLICING_OUT_DIR";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string variant;
  int episodes = 0;
  int steps = 0;
  std::string out;
};

struct Loaded {
  KeyValueConfig cfg;
  Scenario scenario;
  AgentConfig agent;
  RunConfig run;
};

std::string default_out(const std::string& fallback) {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? env : fallback;
}

Loaded load(const Common& c) {
  if (c.config_path.empty()) throw ValidationError("--config is required");
  if (!fs::exists(c.config_path)) throw ValidationError("config file not found: " + c.config_path);
  Loaded l;
  l.cfg = KeyValueConfig::load(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + kv + "'");
    l.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed >= 0) l.cfg.set("run.seeds", std::to_string(c.seed));
  if (!c.variant.empty()) l.cfg.set("run.variant", c.variant);
  if (c.episodes > 0) l.cfg.set("run.episodes", std::to_string(c.episodes));
  if (c.steps > 0) l.cfg.set("run.steps", std::to_string(c.steps));
  l.scenario = Scenario::from_config(l.cfg);
  l.agent = AgentConfig::from_config(l.cfg);
  l.run = RunConfig::from_config(l.cfg);
  l.cfg.check_all_consumed();
  const std::string warning = l.scenario.validate();
  if (!warning.empty()) std::cerr << "warning: " << warning << '\n';
  return l;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f || !(f << text)) throw Error("cannot write " + p.string());
}

class Manifest {
 public:
  Manifest(std::string command, const Loaded& l) : command_(std::move(command)) {
    fields_.emplace_back("config_hash", l.cfg.hash());
    fields_.emplace_back("variant", to_string(l.run.variant));
    std::string seeds;
    for (auto s : l.run.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
    fields_.emplace_back("seeds", seeds);
    fields_.emplace_back("episodes", std::to_string(l.run.episodes));
    fields_.emplace_back("steps", std::to_string(l.run.steps));
  }
  void field(const std::string& k, const std::string& v) { fields_.emplace_back(k, v); }
  void artifact(const fs::path& dir, const std::string& rel) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file(dir / rel))));
    artifacts_.emplace_back(rel, hex);
  }
  void write(const fs::path& dir) const {
    std::ostringstream out;
    out << "slicing-run-manifest 1\ncommand " << command_ << '\n';
    for (const auto& [k, v] : fields_) out << k << ' ' << v << '\n';
    for (const auto& [p, h] : artifacts_) out << "artifact " << p << ' ' << h << '\n';
    write_file(dir / "manifest.txt", out.str());
  }

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> fields_;
  std::vector<std::pair<std::string, std::string>> artifacts_;
};

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.txt";
  if (!fs::exists(p)) throw ValidationError("missing manifest: " + p.string());
  std::istringstream in(read_file(p));
  std::string line;
  std::getline(in, line);
  if (line != "slicing-run-manifest 1") throw ValidationError(p.string() + ": not a run manifest");
  std::map<std::string, std::string> out;
  while (std::getline(in, line)) {
    const auto sp = line.find(' ');
    if (sp == std::string::npos || line.rfind("artifact ", 0) == 0) continue;
    out[line.substr(0, sp)] = line.substr(sp + 1);
  }
  return out;
}

void write_episode_summary(std::ostream& out, const std::vector<EpisodeRecord>& eps) {
  out << "episode,mean_reward,conflict_rate,mean_utilization,mean_latency\n";
  for (const auto& e : eps)
    out << e.episode << ',' << format_double(e.mean_reward) << ',' << format_double(e.conflict_rate) << ','
        << format_double(e.mean_utilization) << ',' << format_double(e.mean_latency) << '\n';
}

std::string records_csv(const std::vector<EpisodeRecord>& eps) {
  std::ostringstream out;
  write_episode_csv_header(out);
  for (const auto& e : eps) write_episode_csv_rows(out, e);
  return out.str();
}

void write_run_artifacts(const fs::path& dir, const Loaded& l, RunOutput& out, Manifest& m,
                         bool with_checkpoints) {
  write_file(dir / "config.cfg", l.cfg.canonical());
  m.artifact(dir, "config.cfg");
  write_file(dir / "records.csv", records_csv(out.episodes));
  m.artifact(dir, "records.csv");
  std::ostringstream summary;
  write_episode_summary(summary, out.episodes);
  write_file(dir / "episodes.csv", summary.str());
  m.artifact(dir, "episodes.csv");
  if (!out.metrics->empty()) {
    write_file(dir / "metrics.prom", export_text(*out.metrics));
    m.artifact(dir, "metrics.prom");
  }
  if (with_checkpoints && !out.agents.empty()) {
    std::vector<std::string> names;
    save_checkpoints((dir / "checkpoints").string(), out.agents, &names);
    for (const auto& n : names) m.artifact(dir, "checkpoints/" + n);
  }
}

int cmd_train(const Common& c) {
  const Loaded l = load(c);
  const fs::path dir = c.out.empty() ? default_out("runs/train") : c.out;
  RunHooks hooks;
  hooks.keep_rows = true;
  RunOutput out = train(l.scenario, l.agent, l.run, l.run.seeds.front(), hooks);
  Manifest m("train", l);
  write_run_artifacts(dir, l, out, m, true);
  m.write(dir);
  std::cout << "trained " << to_string(l.run.variant) << " for " << out.episodes.size() << " episodes -> "
            << dir.string() << '\n';
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint_dir) {
  const Loaded l = load(c);
  const fs::path dir = c.out.empty() ? default_out("runs/evaluate") : c.out;
  const std::uint64_t seed = l.run.seeds.front();
  auto agents = make_agents(l.scenario, l.run.variant, l.agent, seed);
  if (!agents.empty()) {
    if (checkpoint_dir.empty()) throw ValidationError("--checkpoint is required for learning variants");
    load_checkpoints(checkpoint_dir, agents);
  }
  RunHooks hooks;
  hooks.keep_rows = true;
  RunOutput out = evaluate(l.scenario, std::move(agents), l.run.variant, l.run, seed, hooks);
  Manifest m("evaluate", l);
  if (!checkpoint_dir.empty()) m.field("checkpoint", checkpoint_dir);
  write_run_artifacts(dir, l, out, m, false);

  std::vector<double> latencies;
  for (const auto& e : out.episodes)
    for (const auto& step : e.steps)
      for (const auto& r : step) latencies.push_back(r.latency);
  const CdfSeries series = cdf(latencies);
  std::ostringstream cdf_out;
  cdf_out << "latency,fraction\n";
  for (std::size_t i = 0; i < series.values.size(); ++i)
    cdf_out << format_double(series.values[i]) << ',' << format_double(series.fractions[i]) << '\n';
  write_file(dir / "latency_cdf.csv", cdf_out.str());
  m.artifact(dir, "latency_cdf.csv");
  m.write(dir);

  double conflict = 0.0, util = 0.0;
  for (const auto& e : out.episodes) {
    conflict += e.conflict_rate;
    util += e.mean_utilization;
  }
  const double n = static_cast<double>(out.episodes.size());
  std::cout << "evaluated " << to_string(l.run.variant) << ": conflict_rate " << conflict / n
            << ", utilization " << util / n << ", F(" << l.scenario.latency_threshold
            << " s) = " << quantile_below(series, l.scenario.latency_threshold) << '\n';
  return 0;
}

int cmd_compare(const Common& c, const std::vector<std::string>& variant_names) {
  const Loaded l = load(c);
  const fs::path dir = c.out.empty() ? default_out("runs/compare") : c.out;
  std::vector<Variant> variants;
  for (const auto& v : variant_names) variants.push_back(parse_variant(v));
  if (variants.empty()) variants = {Variant::kVanilla, Variant::kApplied, Variant::kIb};
  const CompareResult res = compare(l.scenario, l.agent, l.run, variants);
  Manifest m("compare", l);
  std::string names;
  for (Variant v : variants) names += (names.empty() ? "" : ",") + to_string(v);
  m.field("variants", names);
  write_file(dir / "config.cfg", l.cfg.canonical());
  m.artifact(dir, "config.cfg");
  std::ostringstream grid, util, summary;
  write_grid_csv(grid, variants, res.conflict_grid);
  write_grid_csv(util, variants, res.utilization_grid);
  write_summary(summary, res, l.run.final_window);
  write_file(dir / "conflict_grid.csv", grid.str());
  m.artifact(dir, "conflict_grid.csv");
  write_file(dir / "utilization_grid.csv", util.str());
  m.artifact(dir, "utilization_grid.csv");
  write_file(dir / "summary.txt", summary.str());
  m.artifact(dir, "summary.txt");
  m.write(dir);
  std::cout << summary.str();
  return 0;
}

int cmd_replay(Common c, const std::string& run_dir) {
  if (!run_dir.empty()) {
    const auto manifest = read_manifest(run_dir);
    if (c.config_path.empty()) c.config_path = (fs::path(run_dir) / "config.cfg").string();
    auto get = [&](const char* k) {
      auto it = manifest.find(k);
      if (it == manifest.end()) throw ValidationError("manifest lacks '" + std::string(k) + "'");
      return it->second;
    };
    if (get("command") != "train") throw ValidationError("only train runs can be replayed");
    if (c.seed < 0) c.seed = static_cast<std::int64_t>(std::stoull(get("seeds")));
  }
  const Loaded l = load(c);
  std::ostringstream buf;
  write_episode_csv_header(buf);
  RunHooks hooks;
  hooks.episode_csv = &buf;
  train(l.scenario, l.agent, l.run, l.run.seeds.front(), hooks);
  if (c.out.empty()) {
    std::cout << buf.str();
  } else {
    write_file(c.out, buf.str());
  }
  return 0;
}

int cmd_export(const std::string& csv_path, const std::string& out_path, const std::string& variant) {
  if (csv_path.empty()) throw ValidationError("--csv is required");
  if (!fs::exists(csv_path)) throw ValidationError("episode CSV not found: " + csv_path);
  std::vector<EpisodeRecord> eps;
  try {
    eps = parse_episode_csv(read_file(csv_path));
  } catch (const Error& e) {
    throw ValidationError(csv_path + ": " + e.what());
  }
  std::ostringstream out;
  for (const auto& e : eps) {
    MetricSnapshot snap;
    Labels base;
    if (!variant.empty()) base.emplace_back("variant", variant);
    auto put = [&](const char* name, Labels labels, double v) { snap[make_metric_key(name, std::move(labels))] = v; };
    put("slicing_episode_reward", base, e.mean_reward);
    put("slicing_conflict_rate", base, e.conflict_rate);
    put("slicing_utilization", base, e.mean_utilization);
    put("slicing_latency_seconds", base, e.mean_latency);
    std::map<int, std::pair<double, std::size_t>> per_slice;
    for (const auto& step : e.steps)
      for (const auto& r : step) {
        per_slice[r.slice].first += r.reward;
        ++per_slice[r.slice].second;
      }
    for (const auto& [k, acc] : per_slice) {
      Labels l = base;
      l.emplace_back("slice", std::to_string(k));
      put("slicing_slice_reward", l, acc.first / static_cast<double>(acc.second));
    }
    out << "# episode " << e.episode << '\n' << export_text(snap, e.episode);
  }
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    write_file(out_path, out.str());
  }
  return 0;
}

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) app->add_option("-c,--config", c.config_path, "Scenario config file");
  app->add_option("--set", c.overrides, "Override a config key (key=value)");
  app->add_option("-s,--seed", c.seed, "Seed (replaces run.seeds)");
  app->add_option("-v,--variant", c.variant, "static-baseline | ma-vanilla | ma-applied | ma-ib");
  app->add_option("-e,--episodes", c.episodes, "Episode count");
  app->add_option("--steps", c.steps, "Steps per episode");
  app->add_option("-o,--out", c.out, std::string("Output directory (default from ") + kOutEnv + ")");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent slice resource allocation simulator"};
  app.require_subcommand(1);
  Common common;
  std::string checkpoint, run_dir, csv_path, variant_label;
  std::vector<std::string> variants;

  auto* train_cmd = app.add_subcommand("train", "Train agents and write checkpoints, CSVs and metrics");
  add_common(train_cmd, common);
  auto* eval_cmd = app.add_subcommand("evaluate", "Greedy rollouts from a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory");
  auto* compare_cmd = app.add_subcommand("compare", "Train several variants on shared seeds");
  add_common(compare_cmd, common);
  compare_cmd->add_option("--variants", variants, "Variants to compare")->delimiter(',');
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded seed and config, printing step records");
  add_common(replay_cmd, common);
  replay_cmd->add_option("--run", run_dir, "Directory of a previous train run");
  auto* export_cmd = app.add_subcommand("export", "Convert an episode CSV to exposition snapshots");
  export_cmd->add_option("--csv", csv_path, "Episode CSV")->required();
  export_cmd->add_option("-o,--out", common.out, "Output file (stdout if omitted)");
  export_cmd->add_option("--variant-label", variant_label, "Value for a variant label");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(common);
    if (*eval_cmd) return cmd_evaluate(common, checkpoint);
    if (*compare_cmd) return cmd_compare(common, variants);
    if (*replay_cmd) return cmd_replay(common, run_dir);
    if (*export_cmd) return cmd_export(csv_path, common.out, variant_label);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return 3;
  } catch (const OrchestrationFault& e) {
    std::cerr << "orchestration fault: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
