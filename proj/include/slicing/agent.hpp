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

// Per-slice deep Q-learning agent. The Q-network has a single joint head over
// (allocation level, message symbol) so one argmax picks both.

#ifndef SLICING_AGENT_HPP_
#define SLICING_AGENT_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slicing/config.hpp"
#include "slicing/error.hpp"
#include "slicing/ib_encoder.hpp"
#include "slicing/mlp.hpp"
#include "slicing/random.hpp"
#include "slicing/replay.hpp"

namespace slicing {

enum class Variant { kStaticBaseline, kVanilla, kApplied, kIb };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
inline bool is_learning(Variant v) { return v != Variant::kStaticBaseline; }
inline bool uses_messages(Variant v) { return v == Variant::kApplied || v == Variant::kIb; }
inline bool uses_ib(Variant v) { return v == Variant::kIb; }
inline bool uses_per(Variant v) { return v == Variant::kIb; }

struct Observation {
  double norm_traffic = 0.0;   // traffic / normalizer, clipped to [0, kMaxNormTraffic]
  double cpu_gap = 0.0;        // f_th - last allocation

  friend bool operator==(const Observation&, const Observation&) = default;
};

inline constexpr double kMaxNormTraffic = 1.1;

struct ActionSpace {
  std::vector<double> levels;

  // `count` levels evenly spaced from low_frac * f_th to high_frac * f_th.
  static ActionSpace linear(double f_th, int count, double low_frac, double high_frac);
  std::size_t size() const { return levels.size(); }
};

struct Transition {
  Observation obs;
  MessageVector recv;
  int action = 0;
  int message = 0;
  double reward = 0.0;
  Observation next_obs;
  MessageVector next_recv;
  bool terminal = false;
};

struct AgentConfig {
  std::vector<int> hidden{64, 64};
  double gamma = 0.95;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double max_grad_norm = 10.0;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.6;    // of all episodes
  std::size_t batch = 64;
  std::size_t buffer = 50000;
  int target_sync = 200;        // learner steps
  int train_every = 1;          // env steps per learner step
  std::size_t learn_start = 64; // transitions before the first update
  double per_alpha = 0.6;
  double per_beta_start = 0.4;
  double per_beta_end = 1.0;
  double per_epsilon = 1e-3;
  int latent_dim = 2;
  double beta_ib = 1e-3;
  int ib_hidden = 16;
  double ib_lr = 1e-3;
  int num_levels = 8;
  double level_low = 0.25;
  double level_high = 1.5;
  int alphabet = 3;

  double epsilon_at(double progress) const;
  double per_beta_at(double progress) const;
  void validate() const;
  // Reads `agent.*` keys.
  static AgentConfig from_config(const KeyValueConfig& cfg);
};

// Scalar used by the agents' networks.
using Real = float;

struct FeatureSpec {
  double f_th = 1.0;
  int num_peers = 0;
  int alphabet = 3;
  int latent_dim = 2;
};

// 2 observation features, plus peers * |M| one-hot slots (emergent) or the
// IB latent mean (IB). The vanilla variant ignores received messages.
int feature_size(Variant variant, const FeatureSpec& spec);

template <typename Scalar>
void write_observation_features(const Observation& obs, const FeatureSpec& spec,
                                Eigen::Ref<VectorX<Scalar>> out) {
  out(0) = static_cast<Scalar>(obs.norm_traffic);
  out(1) = static_cast<Scalar>(obs.cpu_gap / spec.f_th);
}

// Batch feature matrix, one column per (obs, recv) pair.
template <typename Scalar>
MatrixX<Scalar> encode_batch(std::span<const Observation* const> obs,
                             std::span<const MessageVector* const> recv, Variant variant,
                             const FeatureSpec& spec, const IbEncoder<Scalar>* ib) {
  const auto n = static_cast<Eigen::Index>(obs.size());
  MatrixX<Scalar> f(feature_size(variant, spec), n);
  for (Eigen::Index b = 0; b < n; ++b) {
    VectorX<Scalar> col(2);
    write_observation_features<Scalar>(*obs[b], spec, col);
    f.col(b).head(2) = col;
  }
  if (!uses_messages(variant)) return f;
  std::vector<const MessageVector*> msgs(recv.begin(), recv.end());
  const MatrixX<Scalar> hot = one_hot_messages<Scalar>(msgs, spec.num_peers, spec.alphabet);
  if (uses_ib(variant)) {
    if (!ib) throw ContractViolation("IB variant needs an encoder");
    f.bottomRows(spec.latent_dim) = ib->latent_mean(hot);
  } else {
    f.bottomRows(hot.rows()) = hot;
  }
  return f;
}

template <typename Scalar>
VectorX<Scalar> encode_inputs(const Observation& obs, const MessageVector& recv,
                              Variant variant, const FeatureSpec& spec,
                              const IbEncoder<Scalar>* ib = nullptr) {
  const Observation* o[] = {&obs};
  const MessageVector* m[] = {&recv};
  return encode_batch<Scalar>(o, m, variant, spec, ib).col(0);
}

template <typename Scalar>
VectorX<Scalar> q_forward(const Mlp<Scalar>& net, const VectorX<Scalar>& features) {
  return net.forward_one(features);
}

// First index of the maximum.
template <typename Scalar>
int argmax_lowest(const VectorX<Scalar>& q) {
  int best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q(i) > q(best)) best = static_cast<int>(i);
  return best;
}

struct JointIndex {
  int action = 0;
  int message = 0;
  int flat = 0;
};

inline JointIndex split_joint(int flat, int alphabet) {
  return {flat / alphabet, flat % alphabet, flat};
}

// Epsilon-greedy over the joint grid: a uniform joint index with probability
// epsilon, otherwise the argmax (ties to the lowest flat index).
template <typename Scalar>
JointIndex select(const Mlp<Scalar>& net, const VectorX<Scalar>& features, double epsilon,
                  int alphabet, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("epsilon must be in [0, 1]");
  const int n = net.output_size();
  if (epsilon > 0.0 && uniform01(rng) < epsilon)
    return split_joint(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n))),
                       alphabet);
  return split_joint(argmax_lowest<Scalar>(q_forward(net, features)), alphabet);
}

template <typename Scalar>
struct TdBatch {
  MatrixX<Scalar> features;        // in x B
  MatrixX<Scalar> next_features;   // in x B
  std::vector<int> joint;          // flat (action, message) index per sample
  VectorX<Scalar> rewards;
  std::vector<bool> terminal;

  Eigen::Index size() const { return features.cols(); }
};

template <typename Scalar>
struct TdResult {
  Scalar loss = 0;
  std::vector<double> td_errors;   // Q - y per sample
};

// Targets y = r + gamma * max Q_target(s'), or r on terminal transitions.
template <typename Scalar>
VectorX<Scalar> td_targets(const Mlp<Scalar>& target, const TdBatch<Scalar>& batch,
                           Scalar gamma) {
  const MatrixX<Scalar> next_q = target.forward(batch.next_features);
  VectorX<Scalar> y = batch.rewards;
  for (Eigen::Index b = 0; b < batch.size(); ++b)
    if (!batch.terminal[static_cast<std::size_t>(b)]) y(b) += gamma * next_q.col(b).maxCoeff();
  return y;
}

// Loss sum_i w_i (Q(s_i, j_i) - y_i)^2 with y held fixed; fills `grad` with
// the parameter gradient when non-null.
template <typename Scalar>
TdResult<Scalar> td_loss(const Mlp<Scalar>& net, const VectorX<Scalar>& targets,
                         const TdBatch<Scalar>& batch, std::span<const Scalar> weights,
                         VectorX<Scalar>* grad) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw ContractViolation("TD batch is empty");
  if (static_cast<Eigen::Index>(weights.size()) != n)
    throw ContractViolation("one importance weight per sample required");
  typename Mlp<Scalar>::Tape tape;
  const MatrixX<Scalar> q = net.forward(batch.features, grad ? &tape : nullptr);
  MatrixX<Scalar> d_out = MatrixX<Scalar>::Zero(q.rows(), n);
  TdResult<Scalar> res;
  res.td_errors.resize(static_cast<std::size_t>(n));
  for (Eigen::Index b = 0; b < n; ++b) {
    const int j = batch.joint[static_cast<std::size_t>(b)];
    if (j < 0 || j >= q.rows()) throw ContractViolation("joint index out of range");
    const Scalar err = q(j, b) - targets(b);
    res.td_errors[static_cast<std::size_t>(b)] = static_cast<double>(err);
    res.loss += weights[static_cast<std::size_t>(b)] * err * err;
    d_out(j, b) = Scalar(2) * weights[static_cast<std::size_t>(b)] * err;
  }
  if (!std::isfinite(static_cast<double>(res.loss)))
    throw DivergenceError("TD loss is not finite");
  if (grad) *grad = net.backward(tape, d_out);
  return res;
}

// One semi-gradient step on the weighted squared TD error.
template <typename Scalar>
TdResult<Scalar> td_update(Mlp<Scalar>& net, const Mlp<Scalar>& target,
                           const TdBatch<Scalar>& batch, Scalar gamma,
                           Optimizer<Scalar>& optimizer, std::span<const Scalar> weights) {
  const VectorX<Scalar> y = td_targets(target, batch, gamma);
  VectorX<Scalar> grad;
  TdResult<Scalar> res = td_loss(net, y, batch, weights, &grad);
  optimizer.step(net.params(), grad);
  if (!net.all_finite()) throw DivergenceError("Q-network parameters diverged");
  return res;
}

template <typename Scalar>
Mlp<Scalar> sync_target(const Mlp<Scalar>& net) {
  return net;
}

class Agent {
 public:
  Agent(int id, int num_peers, double f_th, Variant variant, const AgentConfig& cfg,
        std::uint64_t seed);

  int id() const { return id_; }
  Variant variant() const { return variant_; }
  const ActionSpace& actions() const { return actions_; }
  const FeatureSpec& feature_spec() const { return spec_; }
  const AgentConfig& config() const { return cfg_; }
  const Mlp<Real>& network() const { return net_; }
  const Mlp<Real>& target_network() const { return target_; }
  const IbEncoder<Real>* ib() const { return uses_ib(variant_) ? &ib_ : nullptr; }
  std::int64_t learner_steps() const { return learner_steps_; }
  std::int64_t target_syncs() const { return target_syncs_; }
  std::size_t replay_size() const;

  double epsilon() const { return epsilon_; }
  void set_epsilon(double e);
  // Training progress in [0, 1]; sets epsilon and the PER beta.
  void set_progress(double progress);
  void set_learning(bool on) { learning_ = on; }
  bool learning() const { return learning_; }

  // Phase 1: the message to broadcast, from (obs, previous-step messages).
  int choose_message(const Observation& obs, const MessageVector& prev_recv);
  // Phase 2: the allocation level, from (obs, current-step messages).
  int choose_action(const Observation& obs, const MessageVector& recv);
  double allocation(int action_index) const { return actions_.levels.at(action_index); }
  static int symbol_of(int message_index) { return message_index + 1; }

  // Stores a transition and runs a learner step when one is due. Returns the
  // TD loss of that step, if any.
  std::optional<double> remember(Transition t);
  // One learner step regardless of schedule; nullopt if the buffer is short.
  std::optional<double> learn();

  void save(std::ostream& out) const;
  // Throws ValidationError if the checkpoint does not fit this agent's shape.
  void load(std::istream& in);

 private:
  TdBatch<Real> make_batch(const std::vector<const Transition*>& items) const;

  int id_;
  Variant variant_;
  AgentConfig cfg_;
  ActionSpace actions_;
  FeatureSpec spec_;
  Rng rng_;
  Mlp<Real> net_;
  Mlp<Real> target_;
  Optimizer<Real> optimizer_;
  IbEncoder<Real> ib_;
  UniformReplay<Transition> uniform_;
  PrioritizedReplay<Transition> prioritized_;
  double epsilon_ = 1.0;
  double per_beta_ = 0.4;
  bool learning_ = true;
  std::int64_t env_steps_ = 0;
  std::int64_t learner_steps_ = 0;
  std::int64_t target_syncs_ = 0;
};

}  // namespace slicing

#endif  // SLICING_AGENT_HPP_
