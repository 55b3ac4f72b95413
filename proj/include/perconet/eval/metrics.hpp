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
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Per-impression ranking metrics. Each returns nullopt when the impression
// cannot be scored by that metric (single-class for AUC, no positive for
// MRR and nDCG).

namespace perconet {

struct ScoredImpression {
  std::string id;
  std::vector<double> scores;
  std::vector<int> labels;
};

namespace detail {

inline std::size_t count_positives(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l > 0; }));
}

// Candidate order by descending score, ties kept in original order.
inline std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace detail

// Rank-sum AUC with tied scores sharing their average rank, which counts a
// tied positive/negative pair as one half.
inline std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n = scores.size();
  const std::size_t pos = detail::count_positives(labels);
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0 || labels.size() != n) return std::nullopt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] > 0) rank_sum += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

// Reciprocal rank of the best-ranked positive.
inline std::optional<double> mrr(std::span<const double> scores, std::span<const int> labels) {
  if (detail::count_positives(labels) == 0 || labels.size() != scores.size()) return std::nullopt;
  const auto order = detail::ranking(scores);
  for (std::size_t r = 0; r < order.size(); ++r)
    if (labels[order[r]] > 0) return 1.0 / static_cast<double>(r + 1);
  return std::nullopt;
}

// DCG@k with gain 2^label - 1 and log2(rank + 1) discount, over ideal DCG@k.
inline std::optional<double> ndcg_at_k(std::span<const double> scores, std::span<const int> labels,
                                       std::size_t k) {
  if (k == 0 || detail::count_positives(labels) == 0 || labels.size() != scores.size()) return std::nullopt;
  auto gain = [](int label) { return std::exp2(static_cast<double>(label)) - 1.0; };
  const auto order = detail::ranking(scores);
  double dcg = 0.0;
  for (std::size_t r = 0; r < order.size() && r < k; ++r)
    dcg += gain(labels[order[r]]) / std::log2(static_cast<double>(r) + 2.0);
  std::vector<int> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal.size() && r < k; ++r)
    idcg += gain(ideal[r]) / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

}  // namespace perconet
