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

#include "slicing/agent.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "slicing/format.hpp"

namespace slicing {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kStaticBaseline: return "static-baseline";
    case Variant::kVanilla: return "ma-vanilla";
    case Variant::kApplied: return "ma-applied";
    case Variant::kIb: return "ma-ib";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "static-baseline" || s == "static") return Variant::kStaticBaseline;
  if (s == "ma-vanilla") return Variant::kVanilla;
  if (s == "ma-applied") return Variant::kApplied;
  if (s == "ma-ib") return Variant::kIb;
  throw ValidationError("unknown variant '" + s +
                        "' (expected static-baseline, ma-vanilla, ma-applied or ma-ib)");
}

ActionSpace ActionSpace::linear(double f_th, int count, double low_frac, double high_frac) {
  if (count < 1) throw ContractViolation("action space needs at least one level");
  if (!(low_frac >= 0.0) || !(high_frac >= low_frac))
    throw ContractViolation("action levels must satisfy 0 <= low <= high");
  ActionSpace s;
  for (int i = 0; i < count; ++i) {
    const double frac =
        count == 1 ? low_frac : low_frac + (high_frac - low_frac) * i / (count - 1);
    s.levels.push_back(frac * f_th);
  }
  return s;
}

double AgentConfig::epsilon_at(double progress) const {
  if (eps_fraction <= 0.0) return eps_end;
  const double frac = std::clamp(progress / eps_fraction, 0.0, 1.0);
  return eps_start + (eps_end - eps_start) * frac;
}

double AgentConfig::per_beta_at(double progress) const {
  const double frac = std::clamp(progress, 0.0, 1.0);
  return per_beta_start + (per_beta_end - per_beta_start) * frac;
}

void AgentConfig::validate() const {
  const auto fail = [](const char* key, const char* what) { throw ConfigError(key, what); };
  for (int h : hidden)
    if (h <= 0) fail("agent.hidden", "layer sizes must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("agent.gamma", "must be in [0, 1]");
  if (!(lr > 0.0)) fail("agent.lr", "must be > 0");
  if (!(max_grad_norm >= 0.0)) fail("agent.max_grad_norm", "must be >= 0");
  if (!(eps_start >= 0.0 && eps_start <= 1.0)) fail("agent.eps_start", "must be in [0, 1]");
  if (!(eps_end >= 0.0 && eps_end <= 1.0)) fail("agent.eps_end", "must be in [0, 1]");
  if (!(eps_fraction >= 0.0)) fail("agent.eps_fraction", "must be >= 0");
  if (batch == 0) fail("agent.batch", "must be > 0");
  if (buffer < batch) fail("agent.buffer", "must be >= agent.batch");
  if (target_sync < 1) fail("agent.target_sync", "must be >= 1");
  if (train_every < 1) fail("agent.train_every", "must be >= 1");
  if (!(per_alpha >= 0.0)) fail("agent.per_alpha", "must be >= 0");
  if (!(per_epsilon > 0.0)) fail("agent.per_epsilon", "must be > 0");
  if (latent_dim < 1) fail("agent.latent_dim", "must be >= 1");
  if (!(beta_ib >= 0.0)) fail("agent.beta_ib", "must be >= 0");
  if (ib_hidden < 0) fail("agent.ib_hidden", "must be >= 0");
  if (!(ib_lr > 0.0)) fail("agent.ib_lr", "must be > 0");
  if (num_levels < 1) fail("agent.levels", "must be >= 1");
  if (!(level_low >= 0.0)) fail("agent.level_low", "allocations must be >= 0");
  if (!(level_high >= level_low)) fail("agent.level_high", "must be >= agent.level_low");
  if (alphabet < 1) fail("agent.alphabet", "must be >= 1");
}

AgentConfig AgentConfig::from_config(const KeyValueConfig& cfg) {
  AgentConfig a;
  std::vector<int> hidden;
  for (auto h : cfg.get_ints("agent.hidden", {64, 64})) hidden.push_back(static_cast<int>(h));
  a.hidden = hidden;
  a.gamma = cfg.get_double("agent.gamma", a.gamma);
  a.lr = cfg.get_double("agent.lr", a.lr);
  const std::string opt = cfg.get_string("agent.optimizer", "adam");
  if (opt == "adam") {
    a.optimizer = OptimizerKind::kAdam;
  } else if (opt == "sgd") {
    a.optimizer = OptimizerKind::kSgd;
  } else {
    throw ConfigError("agent.optimizer", "expected adam or sgd, got '" + opt + "'");
  }
  a.max_grad_norm = cfg.get_double("agent.max_grad_norm", a.max_grad_norm);
  a.eps_start = cfg.get_double("agent.eps_start", a.eps_start);
  a.eps_end = cfg.get_double("agent.eps_end", a.eps_end);
  a.eps_fraction = cfg.get_double("agent.eps_fraction", a.eps_fraction);
  const auto non_negative = [&](const char* key, std::int64_t fallback) {
    const auto v = cfg.get_int(key, fallback);
    if (v < 0) throw ConfigError(key, "must be >= 0");
    return static_cast<std::size_t>(v);
  };
  a.batch = non_negative("agent.batch", static_cast<std::int64_t>(a.batch));
  a.buffer = non_negative("agent.buffer", static_cast<std::int64_t>(a.buffer));
  a.target_sync = static_cast<int>(cfg.get_int("agent.target_sync", a.target_sync));
  a.train_every = static_cast<int>(cfg.get_int("agent.train_every", a.train_every));
  a.learn_start = non_negative("agent.learn_start", static_cast<std::int64_t>(a.batch));
  a.per_alpha = cfg.get_double("agent.per_alpha", a.per_alpha);
  a.per_beta_start = cfg.get_double("agent.per_beta_start", a.per_beta_start);
  a.per_beta_end = cfg.get_double("agent.per_beta_end", a.per_beta_end);
  a.per_epsilon = cfg.get_double("agent.per_epsilon", a.per_epsilon);
  a.latent_dim = static_cast<int>(cfg.get_int("agent.latent_dim", a.latent_dim));
  a.beta_ib = cfg.get_double("agent.beta_ib", a.beta_ib);
  a.ib_hidden = static_cast<int>(cfg.get_int("agent.ib_hidden", a.ib_hidden));
  a.ib_lr = cfg.get_double("agent.ib_lr", a.ib_lr);
  a.num_levels = static_cast<int>(cfg.get_int("agent.levels", a.num_levels));
  a.level_low = cfg.get_double("agent.level_low", a.level_low);
  a.level_high = cfg.get_double("agent.level_high", a.level_high);
  a.alphabet = static_cast<int>(cfg.get_int("agent.alphabet", a.alphabet));
  a.validate();
  return a;
}

int feature_size(Variant variant, const FeatureSpec& spec) {
  if (uses_ib(variant)) return 2 + spec.latent_dim;
  if (uses_messages(variant)) return 2 + spec.num_peers * spec.alphabet;
  return 2;
}

Agent::Agent(int id, int num_peers, double f_th, Variant variant, const AgentConfig& cfg,
             std::uint64_t seed)
    : id_(id),
      variant_(variant),
      cfg_(cfg),
      actions_(ActionSpace::linear(f_th, cfg.num_levels, cfg.level_low, cfg.level_high)),
      spec_{f_th, num_peers, cfg.alphabet, cfg.latent_dim},
      rng_(seed),
      uniform_(cfg.buffer),
      prioritized_(cfg.buffer, cfg.per_alpha, cfg.per_epsilon) {
  cfg_.validate();
  if (!is_learning(variant)) throw ContractViolation("the static baseline has no learning agent");
  std::vector<int> sizes{feature_size(variant, spec_)};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(static_cast<int>(actions_.size()) * cfg.alphabet);
  net_ = Mlp<Real>(sizes);
  net_.init_glorot(rng_);
  target_ = sync_target(net_);
  optimizer_.kind = cfg.optimizer;
  optimizer_.lr = static_cast<Real>(cfg.lr);
  optimizer_.max_grad_norm = static_cast<Real>(cfg.max_grad_norm);
  if (uses_ib(variant)) {
    ib_ = IbEncoder<Real>(num_peers, cfg.alphabet, cfg.latent_dim, cfg.ib_hidden,
                          static_cast<Real>(cfg.beta_ib));
    ib_.init(rng_);
    ib_.optimizer().lr = static_cast<Real>(cfg.ib_lr);
  }
  epsilon_ = cfg.eps_start;
  per_beta_ = cfg.per_beta_start;
}

std::size_t Agent::replay_size() const {
  return uses_per(variant_) ? prioritized_.size() : uniform_.size();
}

void Agent::set_epsilon(double e) {
  if (!(e >= 0.0 && e <= 1.0)) throw ContractViolation("epsilon must be in [0, 1]");
  epsilon_ = e;
}

void Agent::set_progress(double progress) {
  epsilon_ = cfg_.epsilon_at(progress);
  per_beta_ = cfg_.per_beta_at(progress);
}

int Agent::choose_message(const Observation& obs, const MessageVector& prev_recv) {
  const auto f = encode_inputs<Real>(obs, prev_recv, variant_, spec_, ib());
  return select(net_, f, epsilon_, cfg_.alphabet, rng_).message;
}

int Agent::choose_action(const Observation& obs, const MessageVector& recv) {
  const auto f = encode_inputs<Real>(obs, recv, variant_, spec_, ib());
  return select(net_, f, epsilon_, cfg_.alphabet, rng_).action;
}

std::optional<double> Agent::remember(Transition t) {
  if (t.action < 0 || t.action >= static_cast<int>(actions_.size()) || t.message < 0 ||
      t.message >= cfg_.alphabet)
    throw ContractViolation("transition indices outside the action/message space");
  if (uses_per(variant_)) {
    prioritized_.add(std::move(t));
  } else {
    uniform_.add(std::move(t));
  }
  ++env_steps_;
  if (!learning_ || env_steps_ % cfg_.train_every != 0) return std::nullopt;
  return learn();
}

TdBatch<Real> Agent::make_batch(const std::vector<const Transition*>& items) const {
  std::vector<const Observation*> obs, next_obs;
  std::vector<const MessageVector*> recv, next_recv;
  for (const Transition* t : items) {
    obs.push_back(&t->obs);
    next_obs.push_back(&t->next_obs);
    recv.push_back(&t->recv);
    next_recv.push_back(&t->next_recv);
  }
  TdBatch<Real> batch;
  batch.features = encode_batch<Real>(obs, recv, variant_, spec_, ib());
  batch.next_features = encode_batch<Real>(next_obs, next_recv, variant_, spec_, ib());
  batch.rewards.resize(static_cast<Eigen::Index>(items.size()));
  for (std::size_t b = 0; b < items.size(); ++b) {
    batch.joint.push_back(items[b]->action * cfg_.alphabet + items[b]->message);
    batch.rewards(static_cast<Eigen::Index>(b)) = static_cast<Real>(items[b]->reward);
    batch.terminal.push_back(items[b]->terminal);
  }
  return batch;
}

std::optional<double> Agent::learn() {
  if (replay_size() < std::max(cfg_.batch, cfg_.learn_start)) return std::nullopt;
  std::vector<const Transition*> items;
  std::vector<Real> weights(cfg_.batch, Real(1));
  PerSample per;
  if (uses_per(variant_)) {
    per = prioritized_.sample(cfg_.batch, per_beta_, rng_);
    for (std::size_t b = 0; b < cfg_.batch; ++b) {
      items.push_back(&prioritized_.at(per.indices[b]));
      weights[b] = static_cast<Real>(per.is_weights[b]);
    }
  } else {
    for (std::size_t i : uniform_.sample(cfg_.batch, rng_)) items.push_back(&uniform_.at(i));
  }

  if (uses_ib(variant_)) {
    std::vector<const MessageVector*> msgs;
    for (const Transition* t : items) msgs.push_back(&t->recv);
    ib_.train_step(one_hot_messages<Real>(msgs, spec_.num_peers, spec_.alphabet), rng_);
  }

  const TdBatch<Real> batch = make_batch(items);
  TdResult<Real> res;
  try {
    res = td_update(net_, target_, batch, static_cast<Real>(cfg_.gamma), optimizer_,
                    std::span<const Real>(weights));
  } catch (const DivergenceError& e) {
    throw DivergenceError("agent " + std::to_string(id_) + ": " + e.what());
  }
  if (uses_per(variant_)) prioritized_.update_priorities(per.indices, res.td_errors);
  ++learner_steps_;
  if (learner_steps_ % cfg_.target_sync == 0) {
    target_ = sync_target(net_);
    ++target_syncs_;
  }
  return static_cast<double>(res.loss);
}

namespace {

constexpr const char* kCheckpointMagic = "slicing-agent-checkpoint";

void write_vector(std::ostream& out, const char* tag, const VectorX<Real>& v) {
  out << tag << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << format_real(v(i));
  out << '\n';
}

void write_optimizer(std::ostream& out, const char* tag, const Optimizer<Real>& o) {
  out << tag << ' ' << (o.kind == OptimizerKind::kAdam ? "adam" : "sgd") << ' '
      << format_real(o.lr) << ' ' << o.t << '\n';
  write_vector(out, "m", o.m);
  write_vector(out, "v", o.v);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw ValidationError("checkpoint truncated");
    return w;
  }
  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) throw ValidationError("checkpoint: expected '" + w + "', got '" + got + "'");
  }
  template <typename Int>
  Int integer() {
    const std::string w = word();
    auto v = parse_integer<Int>(w);
    if (!v) throw ValidationError("checkpoint: bad integer '" + w + "'");
    return *v;
  }
  double real() {
    const std::string w = word();
    auto v = parse_real<double>(w);
    if (!v) throw ValidationError("checkpoint: bad number '" + w + "'");
    return *v;
  }
  VectorX<Real> vec(const char* tag) {
    expect(tag);
    const auto n = integer<Eigen::Index>();
    if (n < 0) throw ValidationError("checkpoint: negative vector size");
    VectorX<Real> v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::string w = word();
      auto x = parse_real<Real>(w);
      if (!x) throw ValidationError("checkpoint: bad number '" + w + "'");
      v(i) = *x;
    }
    return v;
  }
  Optimizer<Real> optimizer(const char* tag, Optimizer<Real> base) {
    expect(tag);
    const std::string kind = word();
    if (kind != "adam" && kind != "sgd") throw ValidationError("checkpoint: bad optimizer");
    base.kind = kind == "adam" ? OptimizerKind::kAdam : OptimizerKind::kSgd;
    base.lr = static_cast<Real>(real());
    base.t = integer<std::int64_t>();
    base.m = vec("m");
    base.v = vec("v");
    return base;
  }

 private:
  std::istream& in_;
};

}  // namespace

void Agent::save(std::ostream& out) const {
  out << kCheckpointMagic << " 1\n";
  out << "variant " << to_string(variant_) << '\n';
  out << "agent " << id_ << '\n';
  out << "peers " << spec_.num_peers << '\n';
  out << "alphabet " << spec_.alphabet << '\n';
  out << "f_th " << format_double(spec_.f_th) << '\n';
  out << "levels " << actions_.size();
  for (double l : actions_.levels) out << ' ' << format_double(l);
  out << '\n';
  out << "layers " << net_.sizes().size();
  for (int s : net_.sizes()) out << ' ' << s;
  out << '\n';
  write_vector(out, "params", net_.params());
  write_vector(out, "target_params", target_.params());
  write_optimizer(out, "optimizer", optimizer_);
  out << "learner_steps " << learner_steps_ << '\n';
  if (uses_ib(variant_)) {
    out << "ib " << ib_.num_peers() << ' ' << ib_.alphabet() << ' ' << ib_.latent_dim() << ' '
        << cfg_.ib_hidden << ' ' << format_real(ib_.beta_ib()) << '\n';
    write_vector(out, "ib_params", ib_.params());
    write_optimizer(out, "ib_optimizer", ib_.optimizer());
  } else {
    out << "ib none\n";
  }
  out << "end\n";
}

void Agent::load(std::istream& in) {
  Reader r(in);
  r.expect(kCheckpointMagic);
  if (r.integer<int>() != 1) throw ValidationError("checkpoint: unsupported version");
  r.expect("variant");
  const std::string variant = r.word();
  if (variant != to_string(variant_))
    throw ValidationError("checkpoint is for variant " + variant + ", agent is " +
                          to_string(variant_));
  r.expect("agent");
  r.integer<int>();
  r.expect("peers");
  if (r.integer<int>() != spec_.num_peers) throw ValidationError("checkpoint: peer count differs");
  r.expect("alphabet");
  if (r.integer<int>() != spec_.alphabet) throw ValidationError("checkpoint: alphabet differs");
  r.expect("f_th");
  r.real();
  r.expect("levels");
  const auto n_levels = r.integer<std::size_t>();
  if (n_levels != actions_.size()) throw ValidationError("checkpoint: action levels differ");
  std::vector<double> levels;
  for (std::size_t i = 0; i < n_levels; ++i) levels.push_back(r.real());
  r.expect("layers");
  const auto n_layers = r.integer<std::size_t>();
  std::vector<int> sizes;
  for (std::size_t i = 0; i < n_layers; ++i) sizes.push_back(r.integer<int>());
  if (sizes != net_.sizes()) throw ValidationError("checkpoint: network shape differs");
  const VectorX<Real> params = r.vec("params");
  if (params.size() != net_.num_params())
    throw ValidationError("checkpoint: parameter count differs");
  const VectorX<Real> target_params = r.vec("target_params");
  if (target_params.size() != net_.num_params())
    throw ValidationError("checkpoint: target parameter count differs");
  Optimizer<Real> opt = r.optimizer("optimizer", optimizer_);
  r.expect("learner_steps");
  const auto steps = r.integer<std::int64_t>();
  r.expect("ib");
  IbEncoder<Real> ib = ib_;
  if (uses_ib(variant_)) {
    if (r.integer<int>() != ib_.num_peers() || r.integer<int>() != ib_.alphabet() ||
        r.integer<int>() != ib_.latent_dim() || r.integer<int>() != cfg_.ib_hidden)
      throw ValidationError("checkpoint: IB encoder shape differs");
    ib.set_beta_ib(static_cast<Real>(r.real()));
    const VectorX<Real> ib_params = r.vec("ib_params");
    if (ib_params.size() != ib.num_params())
      throw ValidationError("checkpoint: IB parameter count differs");
    ib.set_params(ib_params);
    ib.optimizer() = r.optimizer("ib_optimizer", ib.optimizer());
  } else {
    r.expect("none");
  }
  r.expect("end");

  actions_.levels = levels;
  net_.set_params(params);
  target_.set_params(target_params);
  optimizer_ = opt;
  learner_steps_ = steps;
  ib_ = ib;
}

}  // namespace slicing
