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
#include <sstream>
#include <vector>

#include "slicing/agent.hpp"
#include "slicing/error.hpp"

using namespace slicing;

namespace {

using Md = MatrixX<double>;
using Vd = VectorX<double>;

// Relative error between two gradient vectors, normwise.
double rel_err(const Vd& a, const Vd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

Md all_message_pairs(int alphabet) {
  std::vector<MessageVector> combos;
  for (int a = 1; a <= alphabet; ++a)
    for (int b = 1; b <= alphabet; ++b) combos.push_back({a, b});
  std::vector<const MessageVector*> ptrs;
  for (const auto& c : combos) ptrs.push_back(&c);
  return one_hot_messages<double>(ptrs, 2, alphabet);
}

double reconstruction_accuracy(const IbEncoder<double>& ib, const Md& data) {
  const Md noise = Md::Zero(ib.latent_dim(), data.cols());
  const auto out = ib.forward(data, noise);
  int hits = 0, total = 0;
  for (Eigen::Index b = 0; b < data.cols(); ++b)
    for (int p = 0; p < ib.num_peers(); ++p) {
      Eigen::Index want = 0, got = 0;
      data.col(b).segment(p * ib.alphabet(), ib.alphabet()).maxCoeff(&want);
      out.logits.col(b).segment(p * ib.alphabet(), ib.alphabet()).maxCoeff(&got);
      hits += want == got;
      ++total;
    }
  return double(hits) / total;
}

IbEncoder<double> trained_ib(double beta, std::uint64_t seed, int steps, const Md& data) {
  IbEncoder<double> ib(2, 3, 2, 16, beta);
  Rng rng(seed);
  ib.init(rng);
  ib.optimizer().lr = 1e-2;
  for (int i = 0; i < steps; ++i) ib.train_step(data, rng);
  return ib;
}

AgentConfig small_config() {
  AgentConfig c;
  c.hidden = {8};
  c.batch = 4;
  c.learn_start = 4;
  c.buffer = 100;
  c.target_sync = 5;
  return c;
}

Transition some_transition(int i, int peers) {
  Transition t;
  t.obs = {0.1 * (i % 10), 1.0};
  t.next_obs = {0.1 * ((i + 1) % 10), 0.5};
  t.recv.assign(peers, 1 + i % 3);
  t.next_recv.assign(peers, 1 + (i + 1) % 3);
  t.action = i % 8;
  t.message = i % 3;
  t.reward = std::sin(double(i));
  t.terminal = (i % 50) == 49;
  return t;
}

}  // namespace

TEST_CASE("feature sizes per variant") {
  FeatureSpec s{15.0, 2, 3, 2};
  CHECK(feature_size(Variant::kVanilla, s) == 2);
  CHECK(feature_size(Variant::kApplied, s) == 8);
  CHECK(feature_size(Variant::kIb, s) == 4);

  const Observation o{0.5, 3.0};
  const MessageVector m{2, 3};
  const VectorX<double> v = encode_inputs<double>(o, m, Variant::kVanilla, s);
  CHECK(v.size() == 2);
  CHECK(v(0) == 0.5);
  CHECK(v(1) == doctest::Approx(0.2));
  const VectorX<double> a = encode_inputs<double>(o, m, Variant::kApplied, s);
  Vd want(8);
  want << 0.5, 0.2, 0, 1, 0, 0, 0, 1;
  CHECK(a.isApprox(want));
  // Symbol 0 (nothing received yet) encodes as all zeros.
  const VectorX<double> none = encode_inputs<double>(o, MessageVector{0, 0}, Variant::kApplied, s);
  CHECK(none.tail(6).isZero());
  CHECK_THROWS_AS(encode_inputs<double>(o, MessageVector{4, 1}, Variant::kApplied, s), ContractViolation);
  CHECK_THROWS_AS(encode_inputs<double>(o, m, Variant::kIb, s), ContractViolation);
}

TEST_CASE("q forward") {
  SUBCASE("zero weights give zero Q") {
    Mlp<double> net({4, 16, 24});
    CHECK(net.forward_one(Vd::Random(4)).isZero());
  }
  SUBCASE("single layer equals a hand matrix product") {
    Mlp<double> net({3, 2});
    net.weight(0) << 1, 2, 3, -1, 0.5, 4;
    net.bias(0) << 0.25, -2;
    Vd x(3);
    x << 1, -1, 2;
    const Vd q = q_forward(net, x);
    CHECK(q(0) == doctest::Approx(1 - 2 + 6 + 0.25));
    CHECK(q(1) == doctest::Approx(-1 - 0.5 + 8 - 2));
    CHECK(q_forward(net, x) == q);
  }
  SUBCASE("shape mismatch") {
    Mlp<double> net({3, 2});
    CHECK_THROWS_AS(net.forward_one(Vd::Zero(4)), ContractViolation);
  }
}

TEST_CASE("greedy selection and tie breaking") {
  Rng rng(1);
  Mlp<double> net({2, 24});
  const Vd x = Vd::Zero(2);
  CHECK(select(net, x, 0.0, 3, rng).flat == 0);
  net.bias(0)(4) = 1.0;
  net.bias(0)(0) = 1.0;
  JointIndex j = select(net, x, 0.0, 3, rng);
  CHECK(j.flat == 0);
  net.bias(0)(0) = 0.0;
  j = select(net, x, 0.0, 3, rng);
  CHECK(j.flat == 4);
  CHECK(j.action == 1);
  CHECK(j.message == 1);
  CHECK_THROWS_AS(select(net, x, 1.5, 3, rng), ContractViolation);
}

TEST_CASE("argmax is invariant to a constant shift") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Mlp<double> net({2, 8, 24});
    net.init_glorot(rng);
    const Vd x = Vd::Random(2);
    const int before = select(net, x, 0.0, 3, rng).flat;
    net.bias(1).array() += 3.7;
    CHECK(select(net, x, 0.0, 3, rng).flat == before);
  }
}

TEST_CASE("epsilon one samples the joint grid uniformly") {
  Rng rng(2);
  Mlp<double> net({2, 24});
  net.bias(0)(5) = 10.0;
  std::vector<int> counts(24, 0);
  const int n = 100'000;
  for (int i = 0; i < n; ++i) ++counts[select(net, Vd(Vd::Zero(2)), 1.0, 3, rng).flat];
  double chi2 = 0.0;
  const double expected = double(n) / 24;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99.9th percentile of chi-square with 23 degrees of freedom.
  CHECK(chi2 < 49.73);
}

TEST_CASE("one SGD step on a single sample with gamma zero") {
  Mlp<double> net({3, 6});
  Rng rng(4);
  net.init_glorot(rng);
  net.bias(0) << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  // Zero features leave only the bias, whose gradient is 2 (Q - r).
  TdBatch<double> b;
  b.features = Md::Zero(3, 1);
  b.next_features = Md::Random(3, 1);
  b.joint = {4};
  b.rewards = Vd::Constant(1, 2.0);
  b.terminal = {false};
  Optimizer<double> sgd;
  sgd.kind = OptimizerKind::kSgd;
  sgd.lr = 0.1;
  const std::vector<double> w{1.0};
  const Mlp<double> target = sync_target(net);
  const double q0 = net.forward_one(Vd::Zero(3))(4);
  const auto res = td_update(net, target, b, 0.0, sgd, std::span<const double>(w));
  CHECK(res.td_errors[0] == doctest::Approx(q0 - 2.0));
  const double q1 = net.forward_one(Vd::Zero(3))(4);
  CHECK(q1 == doctest::Approx(q0 - 0.1 * 2.0 * (q0 - 2.0)).epsilon(1e-12));
}

TEST_CASE("zero TD error leaves the network unchanged") {
  Mlp<double> net({2, 5, 6});
  Rng rng(5);
  net.init_glorot(rng);
  TdBatch<double> b;
  b.features = Md::Random(2, 3);
  b.next_features = Md::Random(2, 3);
  b.joint = {0, 3, 5};
  const Md q = net.forward(b.features);
  b.rewards.resize(3);
  for (int i = 0; i < 3; ++i) b.rewards(i) = q(b.joint[i], i);
  b.terminal = {true, true, true};
  Optimizer<double> sgd;
  sgd.kind = OptimizerKind::kSgd;
  const Vd before = net.params();
  const std::vector<double> w{1, 1, 1};
  td_update(net, net, b, 0.9, sgd, std::span<const double>(w));
  CHECK(net.params() == before);
}

TEST_CASE("terminal samples use the bare reward as target") {
  Mlp<double> target({2, 3});
  target.bias(0) << 5, 6, 7;
  TdBatch<double> b;
  b.features = Md::Zero(2, 2);
  b.next_features = Md::Zero(2, 2);
  b.joint = {0, 0};
  b.rewards = Vd::Constant(2, 1.0);
  b.terminal = {true, false};
  const Vd y = td_targets(target, b, 0.5);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 1.0 + 0.5 * 7);
}

TEST_CASE("Q-network gradient matches central differences") {
  Rng rng(6);
  for (int draw = 0; draw < 100; ++draw) {
    Mlp<double> net({4, 7, 5, 6});
    net.init_glorot(rng);
    net.params() += 0.1 * Vd::Random(net.num_params());
    TdBatch<double> b;
    b.features = Md::Random(4, 5);
    b.next_features = Md::Random(4, 5);
    b.joint = {0, 5, 2, 3, 1};
    b.rewards = Vd::Random(5);
    b.terminal.assign(5, false);
    const std::vector<double> w{1.0, 0.5, 2.0, 0.25, 1.0};
    const Vd y = Vd::Random(5);
    Vd grad;
    td_loss(net, y, b, std::span<const double>(w), &grad);
    Vd fd(net.num_params());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < net.num_params(); ++i) {
      Mlp<double> p = net, m = net;
      p.params()(i) += h;
      m.params()(i) -= h;
      fd(i) = (td_loss(p, y, b, std::span<const double>(w), static_cast<Vd*>(nullptr)).loss -
               td_loss(m, y, b, std::span<const double>(w), static_cast<Vd*>(nullptr)).loss) /
              (2 * h);
    }
    REQUIRE(rel_err(grad, fd) < 1e-4);
  }
}

TEST_CASE("IB gradient matches central differences") {
  Rng rng(7);
  const Md data = all_message_pairs(3);
  for (int draw = 0; draw < 100; ++draw) {
    IbEncoder<double> ib(2, 3, 2, 5, 0.05 + 0.1 * (draw % 5));
    ib.init(rng);
    const Md noise = ib.draw_noise(data.cols(), rng);
    Vd grad;
    ib.loss_and_gradient(data, noise, &grad);
    const Vd theta = ib.params();
    Vd fd(theta.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vd t = theta;
      t(i) += h;
      ib.set_params(t);
      const double up = ib.loss(data, noise).total;
      t(i) -= 2 * h;
      ib.set_params(t);
      const double down = ib.loss(data, noise).total;
      fd(i) = (up - down) / (2 * h);
    }
    ib.set_params(theta);
    REQUIRE(rel_err(grad, fd) < 1e-4);
  }
}

TEST_CASE("IB reconstructs all nine message pairs") {
  const Md data = all_message_pairs(3);
  const IbEncoder<double> ib = trained_ib(1e-3, 11, 3000, data);
  CHECK(reconstruction_accuracy(ib, data) >= 0.99);
}

TEST_CASE("IB loss decreases during training") {
  const Md data = all_message_pairs(3);
  IbEncoder<double> ib(2, 3, 2, 16, 1e-3);
  Rng rng(12);
  ib.init(rng);
  ib.optimizer().lr = 1e-2;
  const Md zero = Md::Zero(2, data.cols());
  const double start = ib.loss(data, zero).total;
  for (int i = 0; i < 200; ++i) ib.train_step(data, rng);
  CHECK(ib.loss(data, zero).total < start);
}

TEST_CASE("KL shrinks as beta grows") {
  const Md data = all_message_pairs(3);
  const std::vector<double> betas{0.0, 0.01, 0.1, 1.0};
  std::vector<double> kl(betas.size(), 0.0);
  for (std::size_t i = 0; i < betas.size(); ++i) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const IbEncoder<double> ib = trained_ib(betas[i], seed, 2000, data);
      kl[i] += ib.loss(data, Md::Zero(2, data.cols())).kl / 5.0;
    }
  }
  CAPTURE(kl[0]);
  CAPTURE(kl[1]);
  CAPTURE(kl[2]);
  CAPTURE(kl[3]);
  for (std::size_t i = 1; i < kl.size(); ++i) CHECK(kl[i] <= kl[i - 1]);
}

TEST_CASE("IB loss terms") {
  const Md data = all_message_pairs(3);
  Rng rng(13);
  SUBCASE("beta zero keeps only reconstruction") {
    IbEncoder<double> ib(2, 3, 2, 8, 0.0);
    ib.init(rng);
    const auto l = ib.loss(data, ib.draw_noise(data.cols(), rng));
    CHECK(l.kl > 0.0);
    CHECK(l.total == l.reconstruction);
  }
  SUBCASE("standard normal posterior has zero KL") {
    CHECK(gaussian_kl<double>(Vd::Zero(3), Vd::Zero(3)) == 0.0);
    Vd m(1), lv(1);
    m << 1.0;
    lv << std::log(2.0);
    CHECK(gaussian_kl<double>(m, lv) == doctest::Approx(0.5 * (2.0 + 1.0 - 1.0 - std::log(2.0))));
  }
  SUBCASE("clamped log-variance bounds the KL from below") {
    IbEncoder<double> ib(2, 3, 2, 0, 1.0);
    ib.encoder().bias(0).tail(2).setConstant(-100.0);
    const auto out = ib.forward(data, ib.draw_noise(data.cols(), rng));
    CHECK((out.logvar.array() == kLogVarMin).all());
    // Zero noise limit: the sample sits on the mean.
    CHECK((out.latent - out.mean).cwiseAbs().maxCoeff() < 0.05);
    const double floor = 2 * 0.5 * (std::exp(kLogVarMin) - 1.0 - kLogVarMin);
    CHECK(ib.loss(data, Md::Zero(2, 9)).kl >= floor - 1e-12);
    CHECK(ib.loss(data, Md::Zero(2, 9)).kl == doctest::Approx(floor));
  }
}

TEST_CASE("target copy is independent") {
  Mlp<double> net({2, 3, 4});
  Rng rng(14);
  net.init_glorot(rng);
  Mlp<double> target = sync_target(net);
  CHECK(target.params() == net.params());
  net.params()(0) += 1.0;
  CHECK(target.params() != net.params());
}

TEST_CASE("agent target sync schedule") {
  AgentConfig cfg = small_config();
  Agent a(0, 2, 15.0, Variant::kApplied, cfg, 21);
  for (int i = 0; i < 60; ++i) a.remember(some_transition(i, 2));
  CHECK(a.learner_steps() == 60 - 3);
  CHECK(a.target_syncs() == a.learner_steps() / cfg.target_sync);
  a.set_learning(false);
  const auto steps = a.learner_steps();
  a.remember(some_transition(61, 2));
  CHECK(a.learner_steps() == steps);
}

TEST_CASE("agent action space and messages") {
  AgentConfig cfg;
  Agent a(1, 2, 15.0, Variant::kIb, cfg, 3);
  CHECK(a.actions().size() == 8);
  CHECK(a.allocation(0) == doctest::Approx(3.75));
  CHECK(a.allocation(7) == doctest::Approx(22.5));
  CHECK(Agent::symbol_of(0) == 1);
  a.set_epsilon(0.0);
  const int m = a.choose_message({0.3, 0.0}, {0, 0});
  CHECK(m >= 0);
  CHECK(m < 3);
  const int act = a.choose_action({0.3, 0.0}, {1, 2});
  CHECK(act >= 0);
  CHECK(act < 8);
  Transition bad = some_transition(0, 2);
  bad.action = 8;
  CHECK_THROWS_AS(a.remember(bad), ContractViolation);
  CHECK(cfg.epsilon_at(0.0) == 1.0);
  CHECK(cfg.epsilon_at(1.0) == doctest::Approx(cfg.eps_end));
}

TEST_CASE("checkpoint round trip") {
  AgentConfig cfg = small_config();
  for (Variant v : {Variant::kVanilla, Variant::kApplied, Variant::kIb}) {
    Agent a(0, 2, 15.0, v, cfg, 31);
    for (int i = 0; i < 20; ++i) a.remember(some_transition(i, 2));
    std::stringstream buf;
    a.save(buf);
    Agent b(0, 2, 15.0, v, cfg, 99);
    b.load(buf);
    CHECK(b.network().params() == a.network().params());
    CHECK(b.target_network().params() == a.target_network().params());
    if (v == Variant::kIb) CHECK(b.ib()->params() == a.ib()->params());
    b.set_epsilon(0.0);
    a.set_epsilon(0.0);
    CHECK(a.choose_action({0.4, 1.0}, {1, 3}) == b.choose_action({0.4, 1.0}, {1, 3}));
  }
  SUBCASE("shape mismatch is rejected") {
    Agent a(0, 2, 15.0, Variant::kApplied, cfg, 1);
    std::stringstream buf;
    a.save(buf);
    AgentConfig wide = cfg;
    wide.hidden = {16};
    Agent b(0, 2, 15.0, Variant::kApplied, wide, 1);
    CHECK_THROWS_AS(b.load(buf), ValidationError);
  }
  SUBCASE("variant mismatch is rejected") {
    Agent a(0, 2, 15.0, Variant::kApplied, cfg, 1);
    std::stringstream buf;
    a.save(buf);
    Agent b(0, 2, 15.0, Variant::kVanilla, cfg, 1);
    CHECK_THROWS_AS(b.load(buf), ValidationError);
  }
}

TEST_CASE("variant names") {
  for (Variant v : {Variant::kStaticBaseline, Variant::kVanilla, Variant::kApplied, Variant::kIb})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS(parse_variant("nope"));
}
