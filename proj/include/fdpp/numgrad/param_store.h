// Copyright 2026 The FDPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FDPP_NUMGRAD_PARAM_STORE_H_
#define FDPP_NUMGRAD_PARAM_STORE_H_

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace fdpp::numgrad {

// Storage aligned to Eigen's widest packet so vectorized kernels over mapped
// tensors take the same path (and summation order) for every allocation.
using AlignedDoubles = std::vector<double, Eigen::aligned_allocator<double>>;

// Dense row-major tensor of 64-bit reals.
struct Tensor {
  std::vector<int> shape;
  AlignedDoubles data;

  std::size_t numel() const { return data.size(); }
};

std::size_t shape_numel(const std::vector<int>& shape);

// Insertion-ordered collection of uniquely named tensors. Iteration order is
// the insertion order, which fixes the layout seen by optimizers and by the
// serialized form.
class ParamStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  ParamStore() = default;

  // Zero-fills when `data` is empty. Throws std::invalid_argument on a
  // duplicate name or a shape/value-count mismatch.
  Tensor& add(const std::string& name, std::vector<int> shape,
              std::vector<double> data = {});

  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t value_count() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Same names and shapes, all values zero.
  ParamStore zeros_like() const;
  void fill(double value);
  // this += scale * other; shapes must match.
  void axpy(double scale, const ParamStore& other);
  bool same_layout(const ParamStore& other) const;

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// {name: {"shape": [...], "data": [...]}} in insertion order. Values are
// written in shortest round-trip decimal form, so parsing restores every bit.
// Non-finite values cannot be represented and are rejected.
nlohmann::ordered_json to_json(const ParamStore& params);
ParamStore param_store_from_json(const nlohmann::ordered_json& j);

}  // namespace fdpp::numgrad

#endif  // FDPP_NUMGRAD_PARAM_STORE_H_
