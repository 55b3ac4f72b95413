// Copyright 2026 The PerCoNet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/tensor.hpp"

namespace perconet {

struct ParamId {
  std::size_t index = 0;
};

// Named, ordered collection of learnable tensors. Registration order is the
// stable iteration order used by the optimizer and checkpoints.
template <class T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
  };

  ParamId add(std::string name, Tensor<T> tensor, bool trainable = true) {
    if (find(name)) throw ConfigError("param store: duplicate parameter " + name);
    tensor.requires_grad = trainable;
    entries_.push_back(Entry{std::move(name), std::move(tensor), trainable});
    return ParamId{entries_.size() - 1};
  }

  std::optional<ParamId> find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].name == name) return ParamId{i};
    return std::nullopt;
  }

  Tensor<T>& operator[](ParamId id) { return entries_.at(id.index).tensor; }
  const Tensor<T>& operator[](ParamId id) const { return entries_.at(id.index).tensor; }
  Tensor<T>& at(const std::string& name) {
    auto id = find(name);
    if (!id) throw ConfigError("param store: no parameter named " + name);
    return (*this)[*id];
  }

  Entry& entry(std::size_t i) { return entries_.at(i); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  std::size_t size() const { return entries_.size(); }
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.tensor.template cast<U>(), e.trainable);
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

namespace init {

template <class T, class Rng>
Tensor<T> uniform(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

// Glorot uniform for a [fan_out x fan_in] weight.
template <class T, class Rng>
Tensor<T> glorot(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform<T>({fan_out, fan_in}, bound, rng);
}

}  // namespace init

}  // namespace perconet
