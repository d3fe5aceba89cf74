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

#include "slicing/replay.hpp"

namespace slicing {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), base_(1) {
  if (capacity == 0) throw ContractViolation("sum tree capacity must be > 0");
  while (base_ < capacity) base_ <<= 1;
  nodes_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
  if (leaf >= capacity_) throw ContractViolation("sum tree leaf out of range");
  if (!(value >= 0.0)) throw ContractViolation("sum tree values must be >= 0");
  std::size_t i = base_ + leaf;
  nodes_[i] = value;
  // Parents are recomputed from their children, never patched with deltas.
  for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

std::size_t SumTree::find(double mass) const {
  if (!(total() > 0.0)) throw ContractViolation("sum tree is empty");
  mass = std::clamp(mass, 0.0, total());
  std::size_t i = 1;
  while (i < base_) {
    const double left = nodes_[2 * i];
    if (mass < left || nodes_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  std::size_t leaf = i - base_;
  // Land on a populated leaf even when rounding pushed us past the last one.
  while (leaf > 0 && (leaf >= capacity_ || nodes_[base_ + leaf] <= 0.0)) --leaf;
  return leaf;
}

}  // namespace slicing
