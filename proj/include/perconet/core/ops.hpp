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
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/tape.hpp"
#include "perconet/core/tensor.hpp"

// Differentiable primitives. Every function records one node on the tape of
// its inputs. Rank 1 values are treated as a single row.

namespace perconet {

using Mask = std::vector<bool>;

namespace detail {

template <class T>
Tape<T>& tape_of(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw TapeError("ops: operands live on different tapes");
  return *a.tape;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline std::string pair_shapes(const Shape& a, const Shape& b) {
  return shape_string(a) + " and " + shape_string(b);
}

template <class T>
Shape matrix_shape(const Tensor<T>& t) {
  return {t.rows(), t.cols()};
}

}  // namespace detail

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::tape_of(a, b);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  detail::require(A.rank() <= 2 && B.rank() <= 2 && B.rows() == k,
                  "matmul: shape mismatch " +
                      detail::pair_shapes(A.shape, B.shape));
  Tensor<T> C({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    T* c = &C.data[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A.data[i * k + p];
      const T* brow = &B.data[p * n];
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
  return tape.record(std::move(C), {a, b}, [a, b, m, k, n](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    const Tensor<T>& A = t.value(a);
    const Tensor<T>& B = t.value(b);
    if (auto* ga = t.sink(a)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T acc{0};
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * B.data[p * n + j];
          (*ga)[i * k + p] += acc;
        }
    }
    if (auto* gb = t.sink(b)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const T av = A.data[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += av * g[i * n + j];
        }
    }
  });
}

// x [m x in] times weight^T [in x out] plus bias [out]; weight is stored
// [out x in] so each output unit is one weight row.
template <class T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  Tape<T>& tape = detail::tape_of(x, weight);
  const Tensor<T>& X = x.value();
  const Tensor<T>& W = weight.value();
  const Tensor<T>& b = bias.value();
  const std::size_t m = X.rows(), in = X.cols(), out = W.rows();
  detail::require(W.rank() == 2 && W.cols() == in,
                  "linear: shape mismatch " + detail::pair_shapes(X.shape, W.shape));
  detail::require(b.size() == out, "linear: bias " + shape_string(b.shape) +
                                       " does not match weight " + shape_string(W.shape));
  Tensor<T> Y({m, out});
  for (std::size_t i = 0; i < m; ++i) {
    const T* xr = &X.data[i * in];
    for (std::size_t o = 0; o < out; ++o) {
      const T* wr = &W.data[o * in];
      T acc = b.data[o];
      for (std::size_t p = 0; p < in; ++p) acc += xr[p] * wr[p];
      Y.data[i * out + o] = acc;
    }
  }
  return tape.record(std::move(Y), {x, weight, bias},
                     [x, weight, bias, m, in, out](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    const Tensor<T>& X = t.value(x);
    const Tensor<T>& W = t.value(weight);
    auto* gx = t.sink(x);
    auto* gw = t.sink(weight);
    auto* gb = t.sink(bias);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t o = 0; o < out; ++o) {
        const T gy = g[i * out + o];
        if (gy == T{0}) continue;
        if (gb) (*gb)[o] += gy;
        if (gx) {
          const T* wr = &W.data[o * in];
          T* gxr = &(*gx)[i * in];
          for (std::size_t p = 0; p < in; ++p) gxr[p] += gy * wr[p];
        }
        if (gw) {
          const T* xr = &X.data[i * in];
          T* gwr = &(*gw)[o * in];
          for (std::size_t p = 0; p < in; ++p) gwr[p] += gy * xr[p];
        }
      }
    }
  });
}

template <class T>
Var<T> transpose(Var<T> a) {
  const Tensor<T>& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = A.data[i * n + j];
  return a.tape->record(std::move(out), {a}, [a, m, n](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tensor<T> out(std::move(shape), a.value().data);
  return a.tape->record(std::move(out), {a}, [a](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::tape_of(a, b);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  detail::require(A.shape == B.shape,
                  "add: shape mismatch " + detail::pair_shapes(A.shape, B.shape));
  Tensor<T> out = A;
  out.grad.reset();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    if (auto* ga = t.sink(a)) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = t.sink(b)) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::tape_of(a, b);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  detail::require(A.shape == B.shape,
                  "sub: shape mismatch " + detail::pair_shapes(A.shape, B.shape));
  Tensor<T> out(A.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = A.data[i] - B.data[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    if (auto* ga = t.sink(a)) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = t.sink(b)) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

// Elementwise product.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::tape_of(a, b);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  detail::require(A.shape == B.shape,
                  "mul: shape mismatch " + detail::pair_shapes(A.shape, B.shape));
  Tensor<T> out(A.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = A.data[i] * B.data[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    const Tensor<T>& A = t.value(a);
    const Tensor<T>& B = t.value(b);
    if (auto* ga = t.sink(a)) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * B.data[i];
    if (auto* gb = t.sink(b)) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * A.data[i];
  });
}

template <class T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out(a.value().shape);
  const Tensor<T>& A = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = A.data[i] * factor;
  return a.tape->record(std::move(out), {a}, [a, factor](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

// a [m x n] plus row vector b [n] broadcast over rows.
template <class T>
Var<T> add_row(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::tape_of(a, b);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  const std::size_t m = A.rows(), n = A.cols();
  detail::require(B.size() == n,
                  "add_row: shape mismatch " + detail::pair_shapes(A.shape, B.shape));
  Tensor<T> out(A.shape);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = A.data[i * n + j] + B.data[j];
  return tape.record(std::move(out), {a, b}, [a, b, m, n](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    if (auto* ga = t.sink(a)) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = t.sink(b))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g[i * n + j];
  });
}

namespace detail {

// Shared shape of every elementwise unary op: forward f(x), backward
// multiplies by df computed from (x, y).
template <class T, class F, class D>
Var<T> unary(Var<T> a, F f, D df) {
  const Tensor<T>& A = a.value();
  Tensor<T> out(A.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = f(A.data[i]);
  return a.tape->record(std::move(out), {a}, [a, df](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    const Tensor<T>& X = t.value(a);
    const Tensor<T>& Y = t.value(self);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(X.data[i], Y.data[i]);
  });
}

}  // namespace detail

// max(x, slope * x); the derivative at exactly 0 is taken to be slope.
template <class T>
Var<T> leaky_relu(Var<T> x, T slope = T(0.01)) {
  if (!(slope > T{0} && slope < T{1})) {
    throw ConfigError("leaky_relu: slope must lie in (0,1)");
  }
  return detail::unary(
      x, [slope](T v) { return v > T{0} ? v : slope * v; },
      [slope](T v, T) { return v > T{0} ? T{1} : slope; });
}

template <class T>
Var<T> tanh(Var<T> x) {
  return detail::unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

template <class T>
Var<T> sigmoid(Var<T> x) {
  return detail::unary(
      x,
      [](T v) {
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <class T>
Var<T> log(Var<T> x) {
  return detail::unary(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <class T>
Var<T> exp(Var<T> x) {
  return detail::unary(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Var<T> sum(Var<T> a) {
  const Tensor<T>& A = a.value();
  T acc{0};
  for (T v : A.data) acc += v;
  return a.tape->record(Tensor<T>::scalar(acc), {a}, [a](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad(self)[0];
    auto& ga = t.grad(a);
    for (T& v : ga) v += g;
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T{1} / static_cast<T>(a.size()));
}

// Row-wise softmax of logits [m x n] restricted to the columns where mask is
// true. Masked columns get exactly zero weight.
template <class T>
Var<T> softmax_masked(Var<T> logits, const Mask& mask) {
  const Tensor<T>& Z = logits.value();
  const std::size_t m = Z.rows(), n = Z.cols();
  detail::require(mask.size() == n, "softmax_masked: mask of length " +
                                        std::to_string(mask.size()) +
                                        " for logits " + shape_string(Z.shape));
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw DegenerateInputError("softmax_masked: every position is masked");
  }
  Tensor<T> P(Z.shape);
  for (std::size_t i = 0; i < m; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (mask[j]) mx = std::max(mx, Z.data[i * n + j]);
    T denom{0};
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j]) continue;
      const T e = std::exp(Z.data[i * n + j] - mx);
      P.data[i * n + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) P.data[i * n + j] /= denom;
  }
  return logits.tape->record(std::move(P), {logits}, [logits, m, n](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    const Tensor<T>& P = t.value(self);
    auto& gz = t.grad(logits);
    for (std::size_t i = 0; i < m; ++i) {
      T dot{0};
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * P.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gz[i * n + j] += P.data[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

// Zeroes every row whose mask entry is false.
template <class T>
Var<T> mask_rows(Var<T> x, const Mask& row_mask) {
  const Tensor<T>& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  detail::require(row_mask.size() == m, "mask_rows: mask of length " +
                                            std::to_string(row_mask.size()) +
                                            " for " + shape_string(X.shape));
  Tensor<T> out(X.shape);
  for (std::size_t i = 0; i < m; ++i)
    if (row_mask[i])
      std::copy_n(&X.data[i * n], n, &out.data[i * n]);
  return x.tape->record(std::move(out), {x}, [x, row_mask, m, n](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < m; ++i)
      if (row_mask[i])
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j];
  });
}

template <class T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count) {
  const Tensor<T>& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  detail::require(count > 0 && begin + count <= n,
                  "slice_cols: columns [" + std::to_string(begin) + ", " +
                      std::to_string(begin + count) + ") out of " + shape_string(X.shape));
  Tensor<T> out({m, count});
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(&X.data[i * n + begin], count, &out.data[i * count]);
  return x.tape->record(std::move(out), {x}, [x, m, n, begin, count](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) gx[i * n + begin + j] += g[i * count + j];
  });
}

template <class T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t count) {
  const Tensor<T>& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  detail::require(count > 0 && begin + count <= m,
                  "slice_rows: rows [" + std::to_string(begin) + ", " +
                      std::to_string(begin + count) + ") out of " + shape_string(X.shape));
  Tensor<T> out({count, n});
  std::copy_n(&X.data[begin * n], count * n, out.data.begin());
  return x.tape->record(std::move(out), {x}, [x, n, begin, count](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < count * n; ++i) gx[begin * n + i] += g[i];
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat_cols: nothing to concatenate");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == m && p.tape == parts.front().tape,
                    "concat_cols: row count mismatch " +
                        detail::pair_shapes(parts.front().shape(), p.shape()));
    total += p.cols();
  }
  Tensor<T> out({m, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor<T>& P = p.value();
    const std::size_t w = P.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(&P.data[i * w], w, &out.data[i * total + offset]);
    offset += w;
  }
  return parts.front().tape->record(std::move(out), parts, [parts, m, total](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const std::size_t w = t.value(p).cols();
      if (auto* gp = t.sink(p))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) (*gp)[i * w + j] += g[i * total + offset + j];
      offset += w;
    }
  });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat_rows: nothing to concatenate");
  const std::size_t n = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require(p.cols() == n && p.tape == parts.front().tape,
                    "concat_rows: column count mismatch " +
                        detail::pair_shapes(parts.front().shape(), p.shape()));
    total += p.rows();
  }
  Tensor<T> out({total, n});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor<T>& P = p.value();
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + offset * n);
    offset += P.rows();
  }
  return parts.front().tape->record(std::move(out), parts, [parts, n](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const std::size_t r = t.value(p).rows();
      if (auto* gp = t.sink(p))
        for (std::size_t i = 0; i < r * n; ++i) (*gp)[i] += g[offset * n + i];
      offset += r;
    }
  });
}

// Looks up table rows. Positions with keep[i] == false yield zero rows and
// take no gradient.
template <class T>
Var<T> gather_rows(Var<T> table, const std::vector<std::size_t>& ids, const Mask& keep) {
  const Tensor<T>& W = table.value();
  const std::size_t rows = W.rows(), d = W.cols();
  detail::require(ids.size() == keep.size() && !ids.empty(),
                  "gather_rows: ids and mask lengths differ or are empty");
  for (std::size_t id : ids) {
    if (id >= rows) {
      throw VocabularyError("gather_rows: id " + std::to_string(id) +
                            " out of range for table of " + std::to_string(rows) + " rows");
    }
  }
  Tensor<T> out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (keep[i]) std::copy_n(&W.data[ids[i] * d], d, &out.data[i * d]);
  return table.tape->record(std::move(out), {table}, [table, ids, keep, d](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto& gw = t.grad(table);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (keep[i])
        for (std::size_t j = 0; j < d; ++j) gw[ids[i] * d + j] += g[i * d + j];
  });
}

// Row (i * n + j) of the result is a_i + b_j, for a [m x h] and b [n x h].
template <class T>
Var<T> pairwise_add(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::tape_of(a, b);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  const std::size_t m = A.rows(), n = B.rows(), h = A.cols();
  detail::require(B.cols() == h, "pairwise_add: shape mismatch " +
                                     detail::pair_shapes(A.shape, B.shape));
  Tensor<T> out({m * n, h});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < h; ++k)
        out.data[(i * n + j) * h + k] = A.data[i * h + k] + B.data[j * h + k];
  return tape.record(std::move(out), {a, b}, [a, b, m, n, h](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto* ga = t.sink(a);
    auto* gb = t.sink(b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < h; ++k) {
          const T v = g[(i * n + j) * h + k];
          if (ga) (*ga)[i * h + k] += v;
          if (gb) (*gb)[j * h + k] += v;
        }
  });
}

// Inverted dropout: survivors are scaled by 1 / (1 - rate) so the
// expectation is unchanged. Identity when not training or rate == 0.
template <class T, class Rng>
Var<T> dropout(Var<T> x, T rate, bool training, Rng& rng) {
  if (!(rate >= T{0} && rate < T{1})) {
    throw ConfigError("dropout: rate must lie in [0,1)");
  }
  if (!training || rate == T{0}) return x;
  const Tensor<T>& X = x.value();
  std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
  const T factor = T{1} / (T{1} - rate);
  std::vector<T> multiplier(X.size());
  for (T& v : multiplier) v = keep(rng) ? factor : T{0};
  Tensor<T> out(X.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = X.data[i] * multiplier[i];
  return x.tape->record(std::move(out), {x}, [x, multiplier = std::move(multiplier)](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * multiplier[i];
  });
}

// Scaled dot-product attention for `heads` heads at once. q, k, v are
// [n x d]; head h owns columns [h*d/heads, (h+1)*d/heads). Each query row
// attends over the key rows whose mask entry is true. Returns the heads'
// outputs side by side, [n x d].
template <class T>
Var<T> multi_head_attention_core(Var<T> q, Var<T> k, Var<T> v, const Mask& key_mask, std::size_t heads) {
  Tape<T>& tape = detail::tape_of(q, k);
  const Tensor<T>& Q = q.value();
  const Tensor<T>& K = k.value();
  const Tensor<T>& V = v.value();
  const std::size_t n = Q.rows(), d = Q.cols();
  detail::require(K.rows() == n && V.rows() == n && K.cols() == d && V.cols() == d,
                  "attention: q/k/v shapes differ " + detail::pair_shapes(Q.shape, K.shape));
  detail::require(key_mask.size() == n, "attention: mask length " + std::to_string(key_mask.size()) +
                                            " for " + std::to_string(n) + " rows");
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: dimension " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (std::none_of(key_mask.begin(), key_mask.end(), [](bool b) { return b; })) {
    throw DegenerateInputError("attention: every key is masked");
  }
  const std::size_t dh = d / heads;
  const T s = T{1} / std::sqrt(static_cast<T>(dh));
  std::vector<T> probs(heads * n * n, T{0});  // [h][i][j]
  Tensor<T> out({n, d});
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * dh;
    T* P = &probs[h * n * n];
    for (std::size_t i = 0; i < n; ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (!key_mask[j]) continue;
        T dot{0};
        for (std::size_t c = 0; c < dh; ++c) dot += Q.data[i * d + c0 + c] * K.data[j * d + c0 + c];
        P[i * n + j] = dot * s;
        mx = std::max(mx, P[i * n + j]);
      }
      T denom{0};
      for (std::size_t j = 0; j < n; ++j) {
        if (!key_mask[j]) continue;
        P[i * n + j] = std::exp(P[i * n + j] - mx);
        denom += P[i * n + j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (!key_mask[j]) continue;
        P[i * n + j] /= denom;
        const T p = P[i * n + j];
        for (std::size_t c = 0; c < dh; ++c) out.data[i * d + c0 + c] += p * V.data[j * d + c0 + c];
      }
    }
  }
  return tape.record(std::move(out), {q, k, v},
                     [q, k, v, probs = std::move(probs), n, d, dh, heads, s](Tape<T>& t, std::uint32_t self) {
    const std::vector<T>& g = t.grad(self);
    const Tensor<T>& Q = t.value(q);
    const Tensor<T>& K = t.value(k);
    const Tensor<T>& V = t.value(v);
    auto* gq = t.sink(q);
    auto* gk = t.sink(k);
    auto* gv = t.sink(v);
    std::vector<T> dS(n * n);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * dh;
      const T* P = &probs[h * n * n];
      for (std::size_t i = 0; i < n; ++i) {
        // dP_ij = g_i . v_j, then the softmax Jacobian.
        T row{0};
        for (std::size_t j = 0; j < n; ++j) {
          T dp{0};
          if (P[i * n + j] != T{0})
            for (std::size_t c = 0; c < dh; ++c) dp += g[i * d + c0 + c] * V.data[j * d + c0 + c];
          dS[i * n + j] = dp;
          row += dp * P[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) dS[i * n + j] = P[i * n + j] * (dS[i * n + j] - row) * s;
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const T p = P[i * n + j];
          const T ds = dS[i * n + j];
          for (std::size_t c = 0; c < dh; ++c) {
            if (gv) (*gv)[j * d + c0 + c] += p * g[i * d + c0 + c];
            if (gq) (*gq)[i * d + c0 + c] += ds * K.data[j * d + c0 + c];
            if (gk) (*gk)[j * d + c0 + c] += ds * Q.data[i * d + c0 + c];
          }
        }
    }
  });
}

// Per-sample ranking loss from click logits [1 + H]: the first entry is the
// clicked item. Computes -log(p_0 / sum_j p_j) with p = sigmoid(logits),
// evaluated in log space.
template <class T>
Var<T> share_of_first_loss(Var<T> logits) {
  const Tensor<T>& S = logits.value();
  const std::size_t n = S.size();
  detail::require(n >= 2, "share_of_first_loss: need a positive and at least one negative");
  auto log_sigmoid = [](T s) {
    return s >= T{0} ? -std::log1p(std::exp(-s)) : s - std::log1p(std::exp(s));
  };
  std::vector<T> ls(n);
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    ls[j] = log_sigmoid(S.data[j]);
    mx = std::max(mx, ls[j]);
  }
  T acc{0};
  for (T v : ls) acc += std::exp(v - mx);
  const T lse = mx + std::log(acc);
  const T loss = lse - ls[0];
  return logits.tape->record(Tensor<T>::scalar(loss), {logits}, [logits, ls, lse, n](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad(self)[0];
    const Tensor<T>& S = t.value(logits);
    auto& gs = t.grad(logits);
    for (std::size_t j = 0; j < n; ++j) {
      const T share = std::exp(ls[j] - lse);
      const T dl = share - (j == 0 ? T{1} : T{0});
      const T s = S.data[j];
      const T sig_neg = s >= T{0} ? std::exp(-s) / (T{1} + std::exp(-s))
                                  : T{1} / (T{1} + std::exp(s));
      gs[j] += g * dl * sig_neg;
    }
  });
}

// In-batch InfoNCE: row i of anchors is paired with row i of positives, every
// other row of positives is a negative. Returns the mean over rows of
// -log softmax(anchors * positives^T / tau)_ii.
template <class T>
Var<T> info_nce(Var<T> anchors, Var<T> positives, T tau) {
  if (!(tau > T{0})) throw ConfigError("info_nce: temperature must be positive");
  Tape<T>& tape = detail::tape_of(anchors, positives);
  const Tensor<T>& A = anchors.value();
  const Tensor<T>& P = positives.value();
  const std::size_t b = A.rows(), d = A.cols();
  detail::require(P.rows() == b && P.cols() == d,
                  "info_nce: shape mismatch " + detail::pair_shapes(A.shape, P.shape));
  detail::require(b >= 2, "info_nce: need at least two users in the batch");
  // softmax rows kept for backward.
  std::vector<T> soft(b * b);
  T loss{0};
  for (std::size_t i = 0; i < b; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < b; ++j) {
      T dot{0};
      for (std::size_t k = 0; k < d; ++k) dot += A.data[i * d + k] * P.data[j * d + k];
      soft[i * b + j] = dot / tau;
      mx = std::max(mx, soft[i * b + j]);
    }
    T acc{0};
    for (std::size_t j = 0; j < b; ++j) acc += std::exp(soft[i * b + j] - mx);
    const T lse = mx + std::log(acc);
    loss += lse - soft[i * b + i];
    for (std::size_t j = 0; j < b; ++j) soft[i * b + j] = std::exp(soft[i * b + j] - lse);
  }
  loss /= static_cast<T>(b);
  return tape.record(Tensor<T>::scalar(loss), {anchors, positives},
                     [anchors, positives, soft, b, d, tau](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad(self)[0] / (static_cast<T>(b) * tau);
    const Tensor<T>& A = t.value(anchors);
    const Tensor<T>& P = t.value(positives);
    auto* ga = t.sink(anchors);
    auto* gp = t.sink(positives);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) {
        const T coeff = g * (soft[i * b + j] - (i == j ? T{1} : T{0}));
        if (coeff == T{0}) continue;
        for (std::size_t k = 0; k < d; ++k) {
          if (ga) (*ga)[i * d + k] += coeff * P.data[j * d + k];
          if (gp) (*gp)[j * d + k] += coeff * A.data[i * d + k];
        }
      }
  });
}

}  // namespace perconet
