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

#include "fdpp/numgrad/param_store.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fdpp::numgrad {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor& ParamStore::add(const std::string& name, std::vector<int> shape,
                        std::vector<double> data) {
  if (index_.count(name)) {
    throw std::invalid_argument("duplicate tensor name '" + name + "'");
  }
  const std::size_t n = shape_numel(shape);
  if (data.empty()) {
    data.assign(n, 0.0);
  } else if (data.size() != n) {
    std::ostringstream msg;
    msg << "tensor '" << name << "' has " << data.size()
        << " values but its shape requires " << n;
    throw std::invalid_argument(msg.str());
  }
  index_.emplace(name, entries_.size());
  entries_.push_back({name, Tensor{std::move(shape), AlignedDoubles(data.begin(), data.end())}});
  return entries_.back().second;
}

bool ParamStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("no tensor named '" + name + "'");
  }
  return entries_[it->second].second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

std::size_t ParamStore::value_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& [name, t] : entries_) out.add(name, t.shape);
  return out;
}

void ParamStore::fill(double value) {
  for (auto& [name, t] : entries_) std::fill(t.data.begin(), t.data.end(), value);
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first ||
        entries_[i].second.shape != other.entries_[i].second.shape) {
      return false;
    }
  }
  return true;
}

void ParamStore::axpy(double scale, const ParamStore& other) {
  if (!same_layout(other)) {
    throw std::invalid_argument("axpy: parameter layouts differ");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i].second.data;
    const auto& src = other.entries_[i].second.data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].second.data != other.entries_[i].second.data) return false;
  }
  return true;
}

nlohmann::ordered_json to_json(const ParamStore& params) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, t] : params) {
    for (double v : t.data) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("tensor '" + name +
                                 "' holds a non-finite value");
      }
    }
    j[name] = {{"shape", t.shape}, {"data", t.data}};
  }
  return j;
}

ParamStore param_store_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw std::invalid_argument("params must be an object");
  ParamStore out;
  for (const auto& [name, entry] : j.items()) {
    out.add(name, entry.at("shape").get<std::vector<int>>(),
            entry.at("data").get<std::vector<double>>());
  }
  return out;
}

}  // namespace fdpp::numgrad
