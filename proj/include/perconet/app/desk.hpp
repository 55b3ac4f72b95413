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

#include "perconet/data/synthetic.hpp"
#include "perconet/model/config.hpp"

// Laptop-scale settings for the synthetic corpora (50 users, 200 news).
namespace perconet::desk {

inline constexpr std::uint64_t kLearnabilitySeed = 1;

inline Config small_config() {
  Config c;
  c.d_w = c.d_e = c.d_r = c.d_att = c.d_p = 32;
  c.heads = 4;
  c.n_w = 8, c.n_u = 10, c.top_g = 10, c.top_k = 4;
  c.batch_size = 8, c.lr = 3e-3, c.dropout = 0.1;
  c.dev_fraction = 0.1;
  return c;
}

inline Config learnability_config() {
  Config c = small_config();
  c.epochs = 50;
  return c;
}

inline Config ablation_config() {
  Config c = small_config();
  c.epochs = 30;
  return c;
}

// Entities surface under several spellings, so only their ids line up
// across titles.
inline SyntheticOptions persona_driven(std::uint64_t seed) {
  SyntheticOptions o;
  o.seed = seed;
  o.surface_forms = 3;
  return o;
}

}  // namespace perconet::desk
