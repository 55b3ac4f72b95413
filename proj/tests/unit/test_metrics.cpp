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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "perconet/eval/evaluate.hpp"
#include "perconet/eval/metrics.hpp"

namespace perconet {
namespace {

using Scores = std::vector<double>;
using Labels = std::vector<int>;

double pairwise_auc(const Scores& s, const Labels& l) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[i] != 1 || l[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  return wins / pairs;
}

// Rank of candidate i: 1 + candidates strictly above it + earlier ties.
std::size_t rank_of(const Scores& s, std::size_t i) {
  std::size_t r = 1;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++r;
  return r;
}

double scan_mrr(const Scores& s, const Labels& l) {
  std::size_t best = s.size() + 1;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (l[i] == 1) best = std::min(best, rank_of(s, i));
  return 1.0 / static_cast<double>(best);
}

double reference_ndcg(const Scores& s, const Labels& l, std::size_t k) {
  double dcg = 0, idcg = 0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] != 1) continue;
    ++positives;
    const std::size_t r = rank_of(s, i);
    if (r <= k) dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  for (std::size_t r = 1; r <= std::min(positives, k); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return dcg / idcg;
}

struct RandomImpression {
  Scores scores;
  Labels labels;
};

std::vector<RandomImpression> random_impressions(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> len(2, 30);
  std::uniform_real_distribution<double> cont(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::bernoulli_distribution click(0.3), tied(0.3);
  std::vector<RandomImpression> out;
  while (out.size() < count) {
    RandomImpression r;
    const std::size_t n = len(rng);
    const bool ties = tied(rng);
    for (std::size_t i = 0; i < n; ++i) {
      r.scores.push_back(ties ? coarse(rng) * 0.25 : cont(rng));
      r.labels.push_back(click(rng) ? 1 : 0);
    }
    r.labels[0] = 1;
    r.labels[1] = 0;
    std::shuffle(r.labels.begin(), r.labels.end(), rng);
    out.push_back(std::move(r));
  }
  return out;
}

TEST(Auc, ClosedFormCases) {
  EXPECT_EQ(*auc(Scores{0.9, 0.1}, Labels{1, 0}), 1.0);
  EXPECT_EQ(*auc(Scores{0.5, 0.5}, Labels{1, 0}), 0.5);
  EXPECT_EQ(*auc(Scores{0.1, 0.9}, Labels{1, 0}), 0.0);
  EXPECT_FALSE(auc(Scores{0.1, 0.9}, Labels{1, 1}));
  EXPECT_FALSE(auc(Scores{0.1, 0.9}, Labels{0, 0}));
}

TEST(Mrr, ClosedFormCases) {
  EXPECT_EQ(*mrr(Scores{0.9, 0.5, 0.1}, Labels{1, 0, 0}), 1.0);
  EXPECT_EQ(*mrr(Scores{0.9, 0.8, 0.7, 0.2, 0.1}, Labels{0, 0, 1, 0, 0}), 1.0 / 3.0);
  EXPECT_EQ(*mrr(Scores{0.5, 0.5}, Labels{0, 1}), 0.5);
  EXPECT_FALSE(mrr(Scores{0.5, 0.5}, Labels{0, 0}));
}

TEST(Ndcg, ClosedFormCases) {
  EXPECT_EQ(*ndcg_at_k(Scores{0.9, 0.8, 0.1}, Labels{1, 1, 0}, 5), 1.0);
  EXPECT_NEAR(*ndcg_at_k(Scores{0.9, 0.8, 0.7, 0.6, 0.5}, Labels{0, 1, 0, 0, 0}, 5), 1.0 / std::log2(3.0), 1e-15);
  EXPECT_NEAR(1.0 / std::log2(3.0), 0.6309297535714574, 1e-15);
  EXPECT_EQ(*ndcg_at_k(Scores{0.9, 0.8, 0.7}, Labels{0, 0, 1}, 2), 0.0);
  EXPECT_FALSE(ndcg_at_k(Scores{0.9, 0.8}, Labels{0, 0}, 2));
  EXPECT_FALSE(ndcg_at_k(Scores{0.9, 0.8}, Labels{1, 0}, 0));
}

TEST(Metrics, MatchBruteForceOnRandomImpressions) {
  for (const auto& r : random_impressions(1000, 77)) {
    ASSERT_NEAR(*auc(r.scores, r.labels), pairwise_auc(r.scores, r.labels), 1e-12);
    ASSERT_EQ(*mrr(r.scores, r.labels), scan_mrr(r.scores, r.labels));
    for (std::size_t k : {1u, 3u, 5u, 10u})
      ASSERT_NEAR(*ndcg_at_k(r.scores, r.labels, k), reference_ndcg(r.scores, r.labels, k), 1e-12);
  }
}

TEST(Metrics, InvariantUnderMonotoneTransforms) {
  for (const auto& r : random_impressions(200, 8)) {
    Scores t;
    for (double s : r.scores) t.push_back(std::exp(3.0 * s) - 7.0);
    EXPECT_EQ(*auc(r.scores, r.labels), *auc(t, r.labels));
    EXPECT_EQ(*mrr(r.scores, r.labels), *mrr(t, r.labels));
    EXPECT_EQ(*ndcg_at_k(r.scores, r.labels, 5), *ndcg_at_k(t, r.labels, 5));
  }
}

TEST(Aggregate, MeansOverApplicableImpressions) {
  std::vector<ScoredImpression> scored = {
      {"a", {0.9, 0.1}, {1, 0}}, {"b", {0.2, 0.8}, {1, 0}}, {"c", {0.3, 0.4}, {1, 1}}, {"d", {0.3, 0.4}, {0, 0}}};
  auto report = aggregate(scored, {1});
  EXPECT_EQ(report.impressions, 4u);
  EXPECT_EQ(report.auc_excluded, 2u);
  EXPECT_EQ(report.rank_excluded, 1u);
  EXPECT_EQ(report.auc, 0.5);
  EXPECT_EQ(report.mrr, (1.0 + 0.5 + 1.0) / 3.0);
  EXPECT_EQ(report.ndcg.at(1), 2.0 / 3.0);
  const auto text = report.to_text();
  EXPECT_NE(text.find("auc: 0.5000\n"), std::string::npos);
  EXPECT_NE(text.find("mrr: 0.8333\n"), std::string::npos);
  EXPECT_EQ(report.to_json()["ndcg@1"].get<double>(), 2.0 / 3.0);
}

std::vector<Impression> balanced_impressions(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution click(0.5);
  std::vector<Impression> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].id = std::to_string(i);
    for (std::size_t c = 0; c < 10; ++c) out[i].candidates.push_back({c, click(rng) ? 1 : 0});
  }
  return out;
}

TEST(Evaluate, RandomScoresSitNearOneHalf) {
  auto imps = balanced_impressions(2500, 3);
  Rng rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  auto report = evaluate([&](const Impression& imp) {
    Scores s;
    for (std::size_t i = 0; i < imp.candidates.size(); ++i) s.push_back(u(rng));
    return s;
  }, imps, {5, 10});
  EXPECT_GE(report.impressions - report.auc_excluded, 2000u);
  EXPECT_GE(report.auc, 0.47);
  EXPECT_LE(report.auc, 0.53);
}

TEST(Evaluate, LabelOracleIsPerfectAndRepeatable) {
  auto imps = balanced_impressions(300, 5);
  Scorer oracle = [](const Impression& imp) {
    Scores s;
    for (const auto& c : imp.candidates) s.push_back(c.label);
    return s;
  };
  auto a = evaluate(oracle, imps, {5, 10});
  EXPECT_EQ(a.auc, 1.0);
  EXPECT_EQ(a.mrr, 1.0);
  EXPECT_EQ(a, evaluate(oracle, imps, {5, 10}));
  EXPECT_EQ(a, evaluate(oracle, imps, {5, 10}, 4));
}

}  // namespace
}  // namespace perconet
