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

#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/graph.hpp"
#include "perconet/core/ops.hpp"
#include "perconet/core/params.hpp"
#include "perconet/text/vocabulary.hpp"

namespace perconet {

// Per-token embedding producer. The table is [vocabulary size x dim]; a
// trainable table takes part in backpropagation, an imported one does not.
struct EmbeddingBackend {
  Tensor<float> table;
  bool trainable = true;

  std::size_t dim() const { return table.cols(); }
  std::size_t rows() const { return table.rows(); }
};

// Desk-scale default: uniform in [-0.1, 0.1], PAD row zero.
inline EmbeddingBackend trainable_table(std::size_t rows, std::size_t dim, Rng& rng) {
  EmbeddingBackend b{init::uniform<float>({rows, dim}, 0.1, rng), true};
  std::fill_n(b.table.data.begin(), dim, 0.0f);
  return b;
}

// Reads a vector file: line 1 "count dim", then `count` lines of
// "token v_1 ... v_dim". Vocabulary entries missing from the file receive
// the file's "[UNK]" vector (zero if absent). A zero-byte file is an empty
// import. Either the whole file loads or a FormatError is thrown.
inline EmbeddingBackend import_frozen_vectors(const std::string& path, const Vocabulary& vocab,
                                              std::size_t dim) {
  std::ifstream is(path);
  if (!is) throw FormatError("vector file: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) {
    return FormatError("vector file " + path + ":" + std::to_string(line_no) + ": " + what);
  };

  std::vector<std::pair<std::string, std::vector<float>>> rows;
  if (next_line()) {
    std::istringstream header(line);
    long long count = -1, file_dim = -1;
    std::string extra;
    if (!(header >> count >> file_dim) || (header >> extra) || count < 0 || file_dim <= 0) {
      throw fail("malformed header, expected \"count dim\"");
    }
    if (static_cast<std::size_t>(file_dim) != dim) {
      throw fail("dimension " + std::to_string(file_dim) + " does not match configured " +
                 std::to_string(dim));
    }
    for (long long r = 0; r < count; ++r) {
      if (!next_line()) throw fail("expected " + std::to_string(count) + " vectors");
      std::istringstream fields(line);
      std::string token, value;
      fields >> token;
      std::vector<float> vec;
      while (fields >> value) {
        float v = 0.0f;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size()) throw fail("bad number " + value);
        vec.push_back(v);
      }
      if (vec.size() != dim) {
        throw fail("token " + token + " has " + std::to_string(vec.size()) + " values, expected " +
                   std::to_string(dim));
      }
      rows.emplace_back(std::move(token), std::move(vec));
    }
    if (next_line()) throw fail("more vectors than the header declares");
  }

  std::vector<float> unk(dim, 0.0f);
  for (const auto& [token, vec] : rows)
    if (token == "[UNK]") unk = vec;
  EmbeddingBackend b{Tensor<float>({vocab.size(), dim}), false};
  for (std::size_t id = 1; id < vocab.size(); ++id)
    std::copy(unk.begin(), unk.end(), b.table.data.begin() + id * dim);
  for (const auto& [token, vec] : rows) {
    if (auto id = vocab.find(token); id && *id != Vocabulary::kPad)
      std::copy(vec.begin(), vec.end(), b.table.data.begin() + *id * dim);
  }
  return b;
}

// Embeds one token sequence: [n_w x dim], PAD rows zero.
template <class T>
Var<T> encode_tokens(Graph<T>& g, ParamId table, const TokenSequence& seq) {
  return gather_rows(g.param(table), seq.ids, seq.mask);
}

}  // namespace perconet
