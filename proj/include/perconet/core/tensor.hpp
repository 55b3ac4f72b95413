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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"

namespace perconet {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Dense row-major tensor. Rank 1 tensors behave as a single row wherever a
// matrix view is needed.
template <class T>
struct Tensor {
  using value_type = T;

  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::optional<std::vector<T>> grad;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{0})
      : shape(std::move(s)), data(shape_size(shape), fill) {
    validate_shape();
  }
  Tensor(Shape s, std::vector<T> values)
      : shape(std::move(s)), data(std::move(values)) {
    validate_shape();
    if (data.size() != shape_size(shape)) {
      throw DimensionError("tensor: " + std::to_string(data.size()) +
                           " values do not fill shape " + shape_string(shape));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<T> values) {
    return Tensor({rows, cols}, std::move(values));
  }
  static Tensor vector(std::vector<T> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }
  static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols() + c];
  }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), T{0});
  }
  std::vector<T>& ensure_grad() {
    if (!grad) grad.emplace(data.size(), T{0});
    return *grad;
  }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(),
                       [](T v) { return std::isfinite(v); });
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    out.requires_grad = requires_grad;
    return out;
  }

 private:
  void validate_shape() const {
    for (std::size_t extent : shape) {
      if (extent == 0) {
        throw DimensionError("tensor: zero extent in shape " +
                             shape_string(shape));
      }
    }
  }
};

}  // namespace perconet
