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
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/graph.hpp"
#include "perconet/core/ops.hpp"
#include "perconet/core/params.hpp"

namespace perconet {

// y = x W^T + b.
struct Dense {
  ParamId weight;
  ParamId bias;

  template <class T>
  static Dense create(ParamStore<T>& store, const std::string& name,
                      std::size_t in, std::size_t out, Rng& rng) {
    Dense d;
    d.weight = store.add(name + ".weight", init::glorot<T>(out, in, rng));
    d.bias = store.add(name + ".bias", Tensor<T>({out}));
    return d;
  }

  template <class T>
  Var<T> operator()(Graph<T>& g, Var<T> x) const {
    return linear(x, g.param(weight), g.param(bias));
  }
};

// Scaled dot-product self-attention with `heads` heads over the rows of x,
// followed by an output projection. No positional information is added, so
// the layer is equivariant under row permutations. Rows where mask is false
// are excluded as keys and zeroed in the output.
struct MultiHeadSelfAttention {
  ParamId query;
  ParamId key;
  ParamId value;
  Dense out;
  std::size_t heads = 1;

  template <class T>
  static MultiHeadSelfAttention create(ParamStore<T>& store, const std::string& name,
                                       std::size_t dim, std::size_t heads, Rng& rng) {
    if (heads == 0 || dim % heads != 0) {
      throw ConfigError("attention: dimension " + std::to_string(dim) +
                        " is not divisible by " + std::to_string(heads) + " heads");
    }
    MultiHeadSelfAttention m;
    m.heads = heads;
    m.query = store.add(name + ".query", init::glorot<T>(dim, dim, rng));
    m.key = store.add(name + ".key", init::glorot<T>(dim, dim, rng));
    m.value = store.add(name + ".value", init::glorot<T>(dim, dim, rng));
    m.out = Dense::create(store, name + ".out", dim, dim, rng);
    return m;
  }

  template <class T>
  Var<T> operator()(Graph<T>& g, Var<T> x, const Mask& mask) const {
    const std::size_t dim = x.cols();
    if (dim % heads != 0) {
      throw ConfigError("attention: dimension " + std::to_string(dim) +
                        " is not divisible by " + std::to_string(heads) + " heads");
    }
    Var<T> q = matmul(x, transpose(g.param(query)));
    Var<T> k = matmul(x, transpose(g.param(key)));
    Var<T> v = matmul(x, transpose(g.param(value)));
    Var<T> joined = multi_head_attention_core(q, k, v, mask, heads);
    return mask_rows(out(g, joined), mask);
  }
};

template <class T>
struct Pooled {
  Var<T> vector;   // [1 x d]
  Var<T> weights;  // [1 x m]
};

// Additive attention pooling: weights = softmax(q^T tanh(V x_i + b)) over the
// unmasked rows, result = sum_i weights_i x_i.
struct AdditiveAttention {
  Dense project;
  ParamId query;

  template <class T>
  static AdditiveAttention create(ParamStore<T>& store, const std::string& name,
                                  std::size_t in, std::size_t hidden, Rng& rng) {
    AdditiveAttention a;
    a.project = Dense::create(store, name, in, hidden, rng);
    a.query = store.add(name + ".query", init::glorot<T>(1, hidden, rng));
    return a;
  }

  template <class T>
  Pooled<T> operator()(Graph<T>& g, Var<T> items, const Mask& mask) const {
    Var<T> hidden = tanh(project(g, items));
    Var<T> logits = reshape(matmul(g.param(query), transpose(hidden)),
                            Shape{1, items.rows()});
    Var<T> weights = softmax_masked(logits, mask);
    return {matmul(weights, items), weights};
  }
};

}  // namespace perconet
