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

#ifndef SLICING_REPLAY_HPP_
#define SLICING_REPLAY_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "slicing/error.hpp"
#include "slicing/random.hpp"

namespace slicing {

// Binary sum tree over `capacity` leaves. Leaf updates and prefix-mass
// lookups are O(log n).
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return nodes_[base_ + leaf]; }
  double total() const { return nodes_[1]; }
  // Smallest leaf whose inclusive prefix sum exceeds `mass`; mass is clamped
  // into [0, total).
  std::size_t find(double mass) const;

 private:
  std::size_t capacity_;
  std::size_t base_;
  std::vector<double> nodes_;   // 1-based heap layout
};

// Fixed-capacity ring buffer with uniform sampling (with replacement).
template <typename T>
class UniformReplay {
 public:
  explicit UniformReplay(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("replay capacity must be > 0");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const T& at(std::size_t i) const { return items_.at(i); }

  void add(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[next_] = std::move(item);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const {
    if (items_.empty()) throw ContractViolation("cannot sample an empty replay buffer");
    if (items_.size() < batch) throw ContractViolation("replay buffer smaller than batch");
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, items_.size()));
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<T> items_;
};

struct PerSample {
  std::vector<std::size_t> indices;
  std::vector<double> is_weights;   // (N * P(i))^-beta / max over the batch
};

// Proportional prioritized replay. Leaf mass is p_i^alpha with
// p_i = |td_error| + epsilon; new items enter at the largest priority seen.
template <typename T>
class PrioritizedReplay {
 public:
  PrioritizedReplay(std::size_t capacity, double alpha, double epsilon)
      : capacity_(capacity), alpha_(alpha), epsilon_(epsilon), tree_(capacity) {
    if (capacity == 0) throw ContractViolation("replay capacity must be > 0");
    if (!(alpha >= 0.0)) throw ContractViolation("PER alpha must be >= 0");
    if (!(epsilon > 0.0)) throw ContractViolation("PER epsilon must be > 0");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  double alpha() const { return alpha_; }
  const T& at(std::size_t i) const { return items_.at(i); }
  double priority(std::size_t i) const { return std::pow(tree_.get(i), 1.0 / alpha_); }
  double probability(std::size_t i) const { return tree_.get(i) / tree_.total(); }

  void add(T item) { add(std::move(item), max_priority_); }

  void add(T item, double priority) {
    if (!(priority > 0.0)) throw ContractViolation("priorities must be > 0");
    const std::size_t slot = next_;
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[slot] = std::move(item);
    }
    tree_.set(slot, std::pow(priority, alpha_));
    max_priority_ = std::max(max_priority_, priority);
    next_ = (next_ + 1) % capacity_;
  }

  PerSample sample(std::size_t batch, double beta, Rng& rng) const {
    if (items_.empty()) throw ContractViolation("cannot sample an empty replay buffer");
    if (items_.size() < batch) throw ContractViolation("replay buffer smaller than batch");
    PerSample out;
    out.indices.resize(batch);
    out.is_weights.resize(batch);
    const double total = tree_.total();
    const double n = static_cast<double>(items_.size());
    double max_w = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t i = tree_.find(uniform01(rng) * total);
      out.indices[b] = i;
      out.is_weights[b] = std::pow(n * tree_.get(i) / total, -beta);
      max_w = std::max(max_w, out.is_weights[b]);
    }
    for (auto& w : out.is_weights) w /= max_w;
    return out;
  }

  void update_priorities(std::span<const std::size_t> indices,
                         std::span<const double> td_errors) {
    if (indices.size() != td_errors.size())
      throw ContractViolation("one TD error per sampled index required");
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const double p = std::abs(td_errors[b]) + epsilon_;
      tree_.set(indices[b], std::pow(p, alpha_));
      max_priority_ = std::max(max_priority_, p);
    }
  }

 private:
  std::size_t capacity_;
  double alpha_;
  double epsilon_;
  double max_priority_ = 1.0;
  std::size_t next_ = 0;
  SumTree tree_;
  std::vector<T> items_;
};

}  // namespace slicing

#endif  // SLICING_REPLAY_HPP_
