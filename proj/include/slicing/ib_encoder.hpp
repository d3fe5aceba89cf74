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

// Variational information-bottleneck autoencoder over the messages an agent
// receives from its peers. Input is the concatenation of one one-hot group per
// peer (an all-zero group encodes the null symbol). The encoder emits a
// Gaussian posterior (mean, log-variance) over a small latent; the decoder
// reconstructs per-peer symbol logits. Loss per batch:
//
//   mean_b [ sum_peers CE(softmax(logits_peer), symbol_peer) ]
//     + beta_ib * mean_b [ KL(N(mean, exp(logvar)) || N(0, I)) ]
//
// Null groups contribute no reconstruction term.

#ifndef SLICING_IB_ENCODER_HPP_
#define SLICING_IB_ENCODER_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "slicing/error.hpp"
#include "slicing/mlp.hpp"
#include "slicing/random.hpp"

namespace slicing {

// Received symbols, one per peer; 0 is the reserved null symbol, 1..|M| real.
using MessageVector = std::vector<int>;

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

template <typename Scalar>
MatrixX<Scalar> one_hot_messages(const std::vector<const MessageVector*>& batch,
                                 int num_peers, int alphabet) {
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(num_peers * alphabet,
                                              static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const MessageVector& m = *batch[b];
    if (static_cast<int>(m.size()) != num_peers)
      throw ContractViolation("expected " + std::to_string(num_peers) + " peer messages, got " +
                              std::to_string(m.size()));
    for (int p = 0; p < num_peers; ++p) {
      if (m[p] < 0 || m[p] > alphabet)
        throw ContractViolation("message symbol " + std::to_string(m[p]) +
                                " outside the alphabet");
      if (m[p] > 0) out(p * alphabet + (m[p] - 1), static_cast<Eigen::Index>(b)) = Scalar(1);
    }
  }
  return out;
}

template <typename Scalar>
class IbEncoder {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  struct Output {
    Matrix latent;   // d_z x B, reparameterized sample
    Matrix mean;     // d_z x B
    Matrix logvar;   // d_z x B, clamped
    Matrix logits;   // (peers * |M|) x B
  };

  struct Loss {
    Scalar reconstruction = 0;
    Scalar kl = 0;
    Scalar total = 0;
  };

  IbEncoder() = default;

  IbEncoder(int num_peers, int alphabet, int latent_dim, int hidden, Scalar beta_ib)
      : num_peers_(num_peers),
        alphabet_(alphabet),
        latent_dim_(latent_dim),
        beta_ib_(beta_ib) {
    if (num_peers < 1 || alphabet < 1) throw ContractViolation("IB needs peers and symbols");
    if (latent_dim < 1) throw ContractViolation("IB latent dimension must be >= 1");
    if (!(beta_ib >= Scalar(0))) throw ContractViolation("beta_ib must be >= 0");
    const int in = num_peers * alphabet;
    encoder_ = hidden > 0 ? Mlp<Scalar>({in, hidden, 2 * latent_dim})
                          : Mlp<Scalar>({in, 2 * latent_dim});
    decoder_ = hidden > 0 ? Mlp<Scalar>({latent_dim, hidden, in})
                          : Mlp<Scalar>({latent_dim, in});
  }

  void init(Rng& rng) {
    encoder_.init_glorot(rng);
    decoder_.init_glorot(rng);
  }

  int num_peers() const { return num_peers_; }
  int alphabet() const { return alphabet_; }
  int input_size() const { return num_peers_ * alphabet_; }
  int latent_dim() const { return latent_dim_; }
  Scalar beta_ib() const { return beta_ib_; }
  void set_beta_ib(Scalar b) { beta_ib_ = b; }

  Mlp<Scalar>& encoder() { return encoder_; }
  const Mlp<Scalar>& encoder() const { return encoder_; }
  Mlp<Scalar>& decoder() { return decoder_; }
  const Mlp<Scalar>& decoder() const { return decoder_; }
  Optimizer<Scalar>& optimizer() { return optimizer_; }
  const Optimizer<Scalar>& optimizer() const { return optimizer_; }

  Eigen::Index num_params() const { return encoder_.num_params() + decoder_.num_params(); }
  Vector params() const {
    Vector p(num_params());
    p << encoder_.params(), decoder_.params();
    return p;
  }
  void set_params(const Vector& p) {
    if (p.size() != num_params()) throw ContractViolation("IB parameter count mismatch");
    encoder_.set_params(p.head(encoder_.num_params()));
    decoder_.set_params(p.tail(decoder_.num_params()));
  }

  // Posterior mean only; this is what the Q-network sees.
  Matrix latent_mean(const Matrix& onehot) const {
    return encoder_.forward(onehot).topRows(latent_dim_);
  }

  // `noise` is d_z x B standard normal.
  Output forward(const Matrix& onehot, const Matrix& noise) const {
    typename Mlp<Scalar>::Tape enc_tape, dec_tape;
    return forward_impl(onehot, noise, enc_tape, dec_tape);
  }

  Output forward(const Matrix& onehot, Rng& rng) const {
    return forward(onehot, draw_noise(onehot.cols(), rng));
  }

  Matrix draw_noise(Eigen::Index batch, Rng& rng) const {
    Matrix n(latent_dim_, batch);
    for (Eigen::Index j = 0; j < batch; ++j)
      for (Eigen::Index i = 0; i < latent_dim_; ++i)
        n(i, j) = static_cast<Scalar>(standard_normal(rng));
    return n;
  }

  Loss loss(const Matrix& onehot, const Matrix& noise) const {
    return loss_and_gradient(onehot, noise, nullptr);
  }

  // Loss and, when `grad` is non-null, its gradient w.r.t. `params()`.
  Loss loss_and_gradient(const Matrix& onehot, const Matrix& noise, Vector* grad) const {
    typename Mlp<Scalar>::Tape enc_tape, dec_tape;
    const Output out = forward_impl(onehot, noise, enc_tape, dec_tape);
    const Eigen::Index batch = onehot.cols();
    const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch);

    Loss loss;
    Matrix d_logits = Matrix::Zero(out.logits.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int p = 0; p < num_peers_; ++p) {
        const auto target = onehot.col(b).segment(p * alphabet_, alphabet_);
        if (target.sum() == Scalar(0)) continue;
        const auto logits = out.logits.col(b).segment(p * alphabet_, alphabet_);
        const Scalar mx = logits.maxCoeff();
        const Vector e = (logits.array() - mx).exp().matrix();
        const Scalar z = e.sum();
        Eigen::Index t = 0;
        target.maxCoeff(&t);
        loss.reconstruction -= (logits(t) - mx - std::log(z)) * inv_b;
        d_logits.col(b).segment(p * alphabet_, alphabet_) = (e / z - target) * inv_b;
      }
    }
    const auto var = out.logvar.array().exp();
    loss.kl = Scalar(0.5) * inv_b *
              (var + out.mean.array().square() - Scalar(1) - out.logvar.array()).sum();
    loss.total = loss.reconstruction + beta_ib_ * loss.kl;
    if (!std::isfinite(static_cast<double>(loss.total)))
      throw DivergenceError("information-bottleneck loss is not finite");
    if (!grad) return loss;

    Matrix d_latent;
    const Vector g_dec = decoder_.backward(dec_tape, d_logits, &d_latent);
    const Matrix& raw = enc_tape.activations.back();
    Matrix d_enc(2 * latent_dim_, batch);
    const auto std_dev = (out.logvar.array() * Scalar(0.5)).exp();
    d_enc.topRows(latent_dim_) = d_latent + beta_ib_ * inv_b * out.mean;
    Matrix d_logvar = (d_latent.array() * Scalar(0.5) * std_dev * noise.array() +
                       beta_ib_ * inv_b * Scalar(0.5) * (var - Scalar(1)))
                          .matrix();
    const auto raw_lv = raw.bottomRows(latent_dim_).array();
    d_logvar.array() *= ((raw_lv > Scalar(kLogVarMin)) && (raw_lv < Scalar(kLogVarMax)))
                            .template cast<Scalar>();
    d_enc.bottomRows(latent_dim_) = d_logvar;
    const Vector g_enc = encoder_.backward(enc_tape, d_enc);
    grad->resize(num_params());
    *grad << g_enc, g_dec;
    return loss;
  }

  // One optimizer step on the batch; returns the pre-step loss.
  Loss train_step(const Matrix& onehot, Rng& rng) {
    const Matrix noise = draw_noise(onehot.cols(), rng);
    Vector grad;
    const Loss l = loss_and_gradient(onehot, noise, &grad);
    Vector p = params();
    optimizer_.step(p, grad);
    if (!p.allFinite()) throw DivergenceError("information-bottleneck parameters diverged");
    set_params(p);
    return l;
  }

 private:
  Output forward_impl(const Matrix& onehot, const Matrix& noise,
                      typename Mlp<Scalar>::Tape& enc_tape,
                      typename Mlp<Scalar>::Tape& dec_tape) const {
    if (onehot.rows() != input_size()) throw ContractViolation("IB input size mismatch");
    if (noise.rows() != latent_dim_ || noise.cols() != onehot.cols())
      throw ContractViolation("IB noise shape mismatch");
    Output out;
    const Matrix raw = encoder_.forward(onehot, &enc_tape);
    out.mean = raw.topRows(latent_dim_);
    out.logvar = raw.bottomRows(latent_dim_).cwiseMax(Scalar(kLogVarMin)).cwiseMin(Scalar(kLogVarMax));
    out.latent = out.mean + ((out.logvar.array() * Scalar(0.5)).exp() * noise.array()).matrix();
    out.logits = decoder_.forward(out.latent, &dec_tape);
    return out;
  }

  int num_peers_ = 1;
  int alphabet_ = 1;
  int latent_dim_ = 1;
  Scalar beta_ib_ = Scalar(0);
  Mlp<Scalar> encoder_;
  Mlp<Scalar> decoder_;
  Optimizer<Scalar> optimizer_;
};

// KL(N(mean, exp(logvar)) || N(0, 1)) summed over latent dimensions.
template <typename Scalar>
Scalar gaussian_kl(const VectorX<Scalar>& mean, const VectorX<Scalar>& logvar) {
  return Scalar(0.5) *
         (logvar.array().exp() + mean.array().square() - Scalar(1) - logvar.array()).sum();
}

}  // namespace slicing

#endif  // SLICING_IB_ENCODER_HPP_
