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
#include <cstddef>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "perconet/data/mind.hpp"
#include "perconet/eval/metrics.hpp"

namespace perconet {

struct MetricReport {
  double auc = 0.0;
  double mrr = 0.0;
  std::map<std::size_t, double> ndcg;  // k -> nDCG@k
  std::size_t impressions = 0;
  std::size_t auc_excluded = 0;   // single-class impressions
  std::size_t rank_excluded = 0;  // impressions without a positive

  bool operator==(const MetricReport&) const = default;

  // "name: value" lines, four decimals.
  std::string to_text() const {
    std::string out;
    char buf[64];
    auto line = [&](const std::string& name, double v) {
      std::snprintf(buf, sizeof(buf), "%.4f", v);
      out += name + ": " + buf + "\n";
    };
    line("auc", auc);
    line("mrr", mrr);
    for (const auto& [k, v] : ndcg) line("ndcg@" + std::to_string(k), v);
    out += "impressions: " + std::to_string(impressions) + "\n";
    out += "auc_excluded: " + std::to_string(auc_excluded) + "\n";
    out += "rank_excluded: " + std::to_string(rank_excluded) + "\n";
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"auc", auc},
                        {"mrr", mrr},
                        {"impressions", impressions},
                        {"auc_excluded", auc_excluded},
                        {"rank_excluded", rank_excluded}};
    for (const auto& [k, v] : ndcg) j["ndcg@" + std::to_string(k)] = v;
    return j;
  }
};

// Unweighted means of per-impression metrics over the impressions where
// each metric applies.
inline MetricReport aggregate(const std::vector<ScoredImpression>& scored, const std::vector<std::size_t>& ks) {
  MetricReport report;
  report.impressions = scored.size();
  double auc_sum = 0.0, mrr_sum = 0.0;
  std::size_t auc_n = 0, rank_n = 0;
  std::map<std::size_t, double> ndcg_sum;
  for (const auto& s : scored) {
    if (auto a = auc(s.scores, s.labels)) {
      auc_sum += *a;
      ++auc_n;
    } else {
      ++report.auc_excluded;
    }
    if (auto r = mrr(s.scores, s.labels)) {
      mrr_sum += *r;
      ++rank_n;
      for (std::size_t k : ks) ndcg_sum[k] += ndcg_at_k(s.scores, s.labels, k).value();
    } else {
      ++report.rank_excluded;
    }
  }
  report.auc = auc_n ? auc_sum / static_cast<double>(auc_n) : 0.0;
  report.mrr = rank_n ? mrr_sum / static_cast<double>(rank_n) : 0.0;
  for (std::size_t k : ks) report.ndcg[k] = rank_n ? ndcg_sum[k] / static_cast<double>(rank_n) : 0.0;
  return report;
}

using Scorer = std::function<std::vector<double>(const Impression&)>;

// Scores every impression (in parallel over disjoint shards when threads > 1;
// the scorer must then be safe to call concurrently) and aggregates.
inline MetricReport evaluate(const Scorer& scorer, const std::vector<Impression>& impressions,
                             const std::vector<std::size_t>& ks, std::size_t threads = 1) {
  std::vector<ScoredImpression> scored(impressions.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& imp = impressions[i];
      scored[i].id = imp.id;
      scored[i].scores = scorer(imp);
      for (const auto& c : imp.candidates) scored[i].labels.push_back(c.label);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, impressions.size()));
  if (threads == 1) {
    work(0, impressions.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (impressions.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(impressions.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return aggregate(scored, ks);
}

}  // namespace perconet
