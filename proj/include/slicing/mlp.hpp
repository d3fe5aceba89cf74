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

// Fully connected network with tanh hidden layers and a linear output layer.
// All parameters live in one flat vector; layers are Eigen::Map views into it,
// so checkpoints, optimizers and finite-difference checks work on the flat
// form directly. Batches are column-major: one sample per column.

#ifndef SLICING_MLP_HPP_
#define SLICING_MLP_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "slicing/error.hpp"
#include "slicing/random.hpp"

namespace slicing {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
class Mlp {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  // Activations of every layer for one batch; index 0 is the input.
  struct Tape {
    std::vector<Matrix> activations;
  };

  Mlp() = default;

  // `sizes` = {input, hidden..., output}; parameters start at zero.
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ContractViolation("an MLP needs at least two layer sizes");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] <= 0 || sizes_[l + 1] <= 0)
        throw ContractViolation("layer sizes must be positive");
      offsets_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_ = Vector::Zero(static_cast<Eigen::Index>(n));
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  Eigen::Index num_params() const { return params_.size(); }

  const Vector& params() const { return params_; }
  Vector& params() { return params_; }
  void set_params(const Vector& p) {
    if (p.size() != params_.size()) throw ContractViolation("parameter count mismatch");
    params_ = p;
  }

  // Layer l maps sizes[l] -> sizes[l+1]: an (out x in) column-major weight
  // block followed by the bias.
  MatrixMap weight(std::size_t l) {
    return MatrixMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  ConstMatrixMap weight(std::size_t l) const {
    return ConstMatrixMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  VectorMap bias(std::size_t l) {
    return VectorMap(params_.data() + offsets_[l] + weight_count(l), sizes_[l + 1]);
  }
  ConstVectorMap bias(std::size_t l) const {
    return ConstVectorMap(params_.data() + offsets_[l] + weight_count(l), sizes_[l + 1]);
  }

  // Glorot-uniform weights, zero biases.
  void init_glorot(Rng& rng) {
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const double limit = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
      auto w = weight(l);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
          w(i, j) = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * limit);
      bias(l).setZero();
    }
  }

  Matrix forward(const Matrix& input, Tape* tape = nullptr) const {
    check_input(input.rows());
    if (tape) {
      tape->activations.clear();
      tape->activations.push_back(input);
    }
    Matrix h = input;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      Matrix z = weight(l) * h;
      z.colwise() += bias(l);
      if (l + 1 < num_layers()) z = z.array().tanh().matrix();
      h = std::move(z);
      if (tape) tape->activations.push_back(h);
    }
    return h;
  }

  Vector forward_one(const Vector& input) const {
    return forward(Matrix(input)).col(0);
  }

  // Backpropagates dLoss/dOutput through the recorded batch. Returns the flat
  // parameter gradient; `grad_input`, when given, receives dLoss/dInput.
  Vector backward(const Tape& tape, const Matrix& grad_output,
                  Matrix* grad_input = nullptr) const {
    if (tape.activations.size() != num_layers() + 1)
      throw ContractViolation("tape does not match network depth");
    Vector grad = Vector::Zero(params_.size());
    Matrix delta = grad_output;
    for (std::size_t l = num_layers(); l-- > 0;) {
      const Matrix& in = tape.activations[l];
      MatrixMap gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      VectorMap gb(grad.data() + offsets_[l] + weight_count(l), sizes_[l + 1]);
      gw.noalias() = delta * in.transpose();
      gb = delta.rowwise().sum();
      if (l > 0 || grad_input) {
        Matrix back = weight(l).transpose() * delta;
        if (l > 0) {
          // tanh' = 1 - tanh^2, evaluated on the stored activation.
          back.array() *= (Scalar(1) - in.array().square());
          delta = std::move(back);
        } else {
          *grad_input = std::move(back);
        }
      }
    }
    return grad;
  }

  bool all_finite() const { return params_.allFinite(); }

 private:
  std::size_t weight_count(std::size_t l) const {
    return static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l];
  }
  void check_input(Eigen::Index rows) const {
    if (rows != sizes_.front())
      throw ContractViolation("input has " + std::to_string(rows) + " features, network expects " +
                              std::to_string(sizes_.front()));
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  Vector params_;
};

enum class OptimizerKind { kSgd, kAdam };

// Plain SGD or Adam over a flat parameter vector.
template <typename Scalar>
struct Optimizer {
  using Vector = VectorX<Scalar>;

  OptimizerKind kind = OptimizerKind::kAdam;
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  Scalar max_grad_norm = Scalar(0);   // 0 disables clipping
  std::int64_t t = 0;
  Vector m;
  Vector v;

  void step(Vector& params, Vector grad) {
    if (max_grad_norm > Scalar(0)) {
      const Scalar norm = grad.norm();
      if (norm > max_grad_norm) grad *= max_grad_norm / norm;
    }
    if (kind == OptimizerKind::kSgd) {
      params -= lr * grad;
      ++t;
      return;
    }
    if (m.size() != params.size()) {
      m = Vector::Zero(params.size());
      v = Vector::Zero(params.size());
    }
    ++t;
    m = beta1 * m + (Scalar(1) - beta1) * grad;
    v = beta2 * v + (Scalar(1) - beta2) * grad.cwiseProduct(grad);
    const Scalar c1 = Scalar(1) - std::pow(beta1, static_cast<Scalar>(t));
    const Scalar c2 = Scalar(1) - std::pow(beta2, static_cast<Scalar>(t));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
  }
};

}  // namespace slicing

#endif  // SLICING_MLP_HPP_
