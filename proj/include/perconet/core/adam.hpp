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
#include <cstdint>
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/params.hpp"

namespace perconet {

struct AdamOptions {
  double lr = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> first;   // per parameter, empty if frozen
  std::vector<std::vector<T>> second;

  explicit AdamState(AdamOptions opts = {}) : options(opts) {}
};

// One bias-corrected Adam update over every trainable parameter. Gradients
// are read from each tensor's grad buffer; a missing buffer counts as zero.
// Nothing is modified if any gradient is NaN.
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
  auto& entries = params.entries();
  for (const auto& e : entries) {
    if (!e.trainable || !e.tensor.grad) continue;
    if (e.tensor.grad->size() != e.tensor.size()) {
      throw DimensionError("adam: gradient of " + e.name + " has the wrong size");
    }
    for (T g : *e.tensor.grad) {
      if (std::isnan(g)) throw TrainingDivergence("adam: NaN gradient in " + e.name);
    }
  }
  if (state.first.size() != entries.size()) {
    state.first.resize(entries.size());
    state.second.resize(entries.size());
  }
  state.step += 1;
  const auto& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    if (!e.trainable) continue;
    auto& m = state.first[i];
    auto& v = state.second[i];
    if (m.size() != e.tensor.size()) {
      m.assign(e.tensor.size(), T{0});
      v.assign(e.tensor.size(), T{0});
    }
    if (!e.tensor.grad) continue;
    const auto& g = *e.tensor.grad;
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = static_cast<T>(o.beta1 * m[k] + (1.0 - o.beta1) * g[k]);
      v[k] = static_cast<T>(o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k]);
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      e.tensor.data[k] -= static_cast<T>(o.lr * m_hat / (std::sqrt(v_hat) + o.eps));
    }
  }
}

}  // namespace perconet
