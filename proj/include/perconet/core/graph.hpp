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

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "perconet/core/params.hpp"
#include "perconet/core/tape.hpp"

namespace perconet {

using Rng = std::mt19937_64;

// One forward pass: a tape plus lazily bound parameters. Each parameter is
// bound at most once, so every use of it feeds one gradient buffer.
template <class T>
class Graph {
 public:
  Graph(ParamStore<T>& params, bool training, Rng* rng = nullptr,
        bool grad_enabled = true)
      : tape_(grad_enabled),
        params_(&params),
        bound_(params.size()),
        training_(training),
        rng_(rng) {}

  // Inference graph over a read-only store: eval mode, no gradients, so the
  // store is never written and may be shared between threads.
  explicit Graph(const ParamStore<T>& params)
      : tape_(false),
        params_(const_cast<ParamStore<T>*>(&params)),
        bound_(params.size()),
        training_(false),
        rng_(nullptr) {}

  Tape<T>& tape() { return tape_; }
  bool training() const { return training_; }

  Rng& rng() {
    if (!rng_) throw ConfigError("graph: training mode requires a random generator");
    return *rng_;
  }
  // Swaps the generator used by dropout; returns the previous one.
  Rng* set_rng(Rng* rng) {
    Rng* old = rng_;
    rng_ = rng;
    return old;
  }

  Var<T> param(ParamId id) {
    auto& slot = bound_.at(id.index);
    if (!slot) {
      auto& entry = params_->entry(id.index);
      slot = tape_.bind(entry.tensor, entry.trainable);
    }
    return *slot;
  }

  Var<T> constant(Tensor<T> value) { return tape_.constant(std::move(value)); }

  ParamStore<T>& params() { return *params_; }

 private:
  Tape<T> tape_;
  ParamStore<T>* params_;
  std::vector<std::optional<Var<T>>> bound_;
  bool training_;
  Rng* rng_;
};

}  // namespace perconet
