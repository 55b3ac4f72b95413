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
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perconet/core/errors.hpp"
#include "perconet/core/graph.hpp"

// Persona-driven synthetic corpus in MIND format. Every user has a latent
// set of interest entities; a candidate is clicked with high probability iff
// it mentions one of them. Each entity owns a few topic words that appear in
// the titles and abstracts of news carrying it.

namespace perconet {

struct SyntheticOptions {
  std::size_t users = 50;
  std::size_t news = 200;
  std::size_t entities = 20;
  std::uint64_t seed = 1;
  std::size_t interests_per_user = 2;
  std::size_t history_length = 8;
  std::size_t impressions_per_user = 8;
  std::size_t candidates = 10;
  std::size_t matching_candidates = 3;  // candidates guaranteed to overlap
  std::size_t title_length = 8;
  std::size_t abstract_length = 14;
  std::size_t surface_forms = 1;  // spellings per entity, at most 3
  std::size_t max_entities_per_news = 4;
  double entity_count_decay = 0.25;  // P(k entities) ~ decay^(k-1)
  double click_if_match = 0.95;
  double click_otherwise = 0.02;
};

struct SyntheticData {
  std::string news_tsv;
  std::string behaviors_tsv;
  std::string truth_tsv;  // user \t comma-separated interest WikiData ids
  std::vector<std::vector<std::size_t>> news_entities;  // entity indices per news
  std::vector<std::vector<std::size_t>> user_interests;

  static std::string news_id(std::size_t i) { return "N" + std::to_string(i + 1); }
  static std::string user_id(std::size_t u) { return "U" + std::to_string(u + 1); }
  static std::string entity_id(std::size_t e) { return "Q" + std::to_string(1000 + e); }
};

namespace detail {

inline const std::vector<std::string>& syllables() {
  static const std::vector<std::string> s = {"ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pa",
                                             "do", "fi", "gu", "ha", "je", "bo"};
  return s;
}

// Unique pronounceable name for entity e (unique for e < 256).
inline std::string entity_name(std::size_t e) {
  const auto& s = syllables();
  return s[e % s.size()] + s[(e / s.size()) % s.size()] + s[(e * 7 + 3) % s.size()];
}

inline std::vector<std::string> topic_words(std::size_t e) {
  const std::string base = entity_name(e);
  return {base, base + "ian", base + "ville"};
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "the",    "report", "today",  "update", "new",     "local",   "city",    "week",    "people",
      "story",  "time",   "plan",   "view",   "officials", "says",  "after",   "before",  "more",
      "than",   "first",  "last",   "year",   "big",     "small",   "could",   "will",    "how",
      "why",    "what",   "inside", "latest", "season",  "fans",    "market",  "school",  "family",
      "home",   "night",  "day",    "game",   "show",    "world",   "state",   "north",   "south",
      "major",  "plans",  "deal",   "change", "record",  "watch",   "photos",  "video",   "live"};
  return words;
}

inline std::string mind_time(std::int64_t seconds_since_start) {
  // Base 11/9/2019 12:00:00 AM; synthetic spans stay well within one month.
  const std::int64_t day = seconds_since_start / 86400;
  std::int64_t rem = seconds_since_start % 86400;
  const int h24 = static_cast<int>(rem / 3600);
  rem %= 3600;
  const int mi = static_cast<int>(rem / 60);
  const int s = static_cast<int>(rem % 60);
  const int h12 = h24 % 12 == 0 ? 12 : h24 % 12;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "11/%d/2019 %d:%02d:%02d %s", static_cast<int>(9 + day), h12, mi, s,
                h24 < 12 ? "AM" : "PM");
  return buf;
}

template <class R>
std::string join_shuffled(std::vector<std::string> words, R& rng) {
  std::shuffle(words.begin(), words.end(), rng);
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticOptions& o) {
  if (o.users == 0 || o.news == 0 || o.entities < 2 || o.entities > 256) {
    throw ConfigError("synth: need users >= 1, news >= 1 and 2 <= entities <= 256");
  }
  if (o.interests_per_user == 0 || o.interests_per_user > o.entities) {
    throw ConfigError("synth: interests_per_user must lie in [1, entities]");
  }
  if (o.max_entities_per_news == 0 || !(o.entity_count_decay > 0)) {
    throw ConfigError("synth: need max_entities_per_news >= 1 and entity_count_decay > 0");
  }
  if (o.candidates < 2) throw ConfigError("synth: need at least two candidates per impression");
  if (o.surface_forms < 1 || o.surface_forms > 3) throw ConfigError("synth: surface_forms must lie in [1, 3]");
  Rng rng(o.seed);
  SyntheticData data;
  std::uniform_int_distribution<std::size_t> entity_pick(0, o.entities - 1);
  std::vector<double> count_weights;
  for (std::size_t k = 1; k <= std::min(o.max_entities_per_news, o.entities); ++k)
    count_weights.push_back(std::pow(o.entity_count_decay, static_cast<double>(k - 1)));
  std::discrete_distribution<std::size_t> count_index(count_weights.begin(), count_weights.end());
  auto count_pick = [&](Rng& r) { return count_index(r) + 1; };
  const auto& fillers = detail::filler_words();
  std::uniform_int_distribution<std::size_t> filler_pick(0, fillers.size() - 1);
  std::uniform_int_distribution<std::size_t> topic_pick(0, o.surface_forms - 1);

  for (std::size_t i = 0; i < o.news; ++i) {
    std::vector<std::size_t> ents;
    const std::size_t count = count_pick(rng);
    while (ents.size() < count) {
      const std::size_t e = entity_pick(rng);
      if (std::find(ents.begin(), ents.end(), e) == ents.end()) ents.push_back(e);
    }
    std::vector<std::string> title, abstract;
    nlohmann::json title_json = nlohmann::json::array(), abstract_json = nlohmann::json::array();
    for (std::size_t e : ents) {
      const auto words = detail::topic_words(e);
      title.push_back(words[topic_pick(rng)]);
      abstract.push_back(words[topic_pick(rng)]);
      abstract.push_back(words[topic_pick(rng)]);
      const std::string label = detail::entity_name(e);
      title_json.push_back({{"Label", label}, {"Type", "C"}, {"WikidataId", SyntheticData::entity_id(e)}});
      abstract_json.push_back({{"Label", label}, {"Type", "C"}, {"WikidataId", SyntheticData::entity_id(e)}});
    }
    while (title.size() < o.title_length) title.push_back(fillers[filler_pick(rng)]);
    while (abstract.size() < o.abstract_length) abstract.push_back(fillers[filler_pick(rng)]);
    data.news_tsv += SyntheticData::news_id(i) + "\tnews\tsynthetic\t" + detail::join_shuffled(title, rng) + "\t" +
                     detail::join_shuffled(abstract, rng) + "\thttps://example.org/" +
                     SyntheticData::news_id(i) + "\t" + title_json.dump() + "\t" + abstract_json.dump() + "\n";
    data.news_entities.push_back(std::move(ents));
  }

  auto overlaps = [&](std::size_t news, const std::vector<std::size_t>& interests) {
    for (std::size_t e : data.news_entities[news])
      if (std::find(interests.begin(), interests.end(), e) != interests.end()) return true;
    return false;
  };

  std::vector<std::vector<std::size_t>> histories(o.users);
  for (std::size_t u = 0; u < o.users; ++u) {
    std::vector<std::size_t> interests;
    while (interests.size() < o.interests_per_user) {
      const std::size_t e = entity_pick(rng);
      if (std::find(interests.begin(), interests.end(), e) == interests.end()) interests.push_back(e);
    }
    std::vector<std::size_t> matching;
    for (std::size_t i = 0; i < o.news; ++i)
      if (overlaps(i, interests)) matching.push_back(i);
    std::shuffle(matching.begin(), matching.end(), rng);
    // Half the matching news stays out of the history so candidates can match.
    matching.resize(std::min({matching.size(), o.history_length, std::max<std::size_t>(1, matching.size() / 2)}));
    histories[u] = matching;
    std::string truth;
    for (std::size_t e : interests) truth += (truth.empty() ? "" : ",") + SyntheticData::entity_id(e);
    data.truth_tsv += SyntheticData::user_id(u) + "\t" + truth + "\n";
    data.user_interests.push_back(std::move(interests));
  }

  std::bernoulli_distribution click_match(o.click_if_match), click_other(o.click_otherwise);
  std::uniform_int_distribution<std::size_t> news_pick(0, o.news - 1);
  std::uniform_int_distribution<std::int64_t> gap(30, 600);
  std::int64_t clock = 0;
  std::size_t impression_id = 0;
  std::vector<std::size_t> user_order(o.users);
  for (std::size_t u = 0; u < o.users; ++u) user_order[u] = u;
  for (std::size_t round = 0; round < o.impressions_per_user; ++round) {
    std::shuffle(user_order.begin(), user_order.end(), rng);
    for (std::size_t u : user_order) {
      const auto& interests = data.user_interests[u];
      const auto& hist = histories[u];
      std::vector<std::size_t> pool_match, pool_other;
      for (std::size_t i = 0; i < o.news; ++i) {
        if (std::find(hist.begin(), hist.end(), i) != hist.end()) continue;
        (overlaps(i, interests) ? pool_match : pool_other).push_back(i);
      }
      std::shuffle(pool_match.begin(), pool_match.end(), rng);
      std::set<std::size_t> chosen;
      for (std::size_t k = 0; k < pool_match.size() && chosen.size() < o.matching_candidates; ++k)
        chosen.insert(pool_match[k]);
      std::size_t guard = 0;
      while (chosen.size() < o.candidates && guard++ < 100 * o.candidates) {
        const std::size_t i = news_pick(rng);
        if (std::find(hist.begin(), hist.end(), i) == hist.end()) chosen.insert(i);
      }
      std::vector<std::size_t> cands(chosen.begin(), chosen.end());
      std::shuffle(cands.begin(), cands.end(), rng);
      std::vector<int> labels;
      for (std::size_t c : cands) labels.push_back(overlaps(c, interests) ? click_match(rng) : click_other(rng));
      if (std::none_of(labels.begin(), labels.end(), [](int l) { return l == 1; })) {
        for (std::size_t k = 0; k < cands.size(); ++k)
          if (overlaps(cands[k], interests)) {
            labels[k] = 1;
            break;
          }
      }
      if (std::none_of(labels.begin(), labels.end(), [](int l) { return l == 0; })) {
        for (std::size_t k = 0; k < cands.size(); ++k)
          if (!overlaps(cands[k], interests)) {
            labels[k] = 0;
            break;
          }
      }
      clock += gap(rng);
      std::string history_field, candidate_field;
      for (std::size_t h : hist) history_field += (history_field.empty() ? "" : " ") + SyntheticData::news_id(h);
      for (std::size_t k = 0; k < cands.size(); ++k)
        candidate_field += (k ? " " : "") + SyntheticData::news_id(cands[k]) + "-" + std::to_string(labels[k]);
      data.behaviors_tsv += std::to_string(++impression_id) + "\t" + SyntheticData::user_id(u) + "\t" +
                            detail::mind_time(clock) + "\t" + history_field + "\t" + candidate_field + "\n";
    }
  }
  return data;
}

inline void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw ParseError((dir / name).string(), 0, "cannot write");
    os << body;
  };
  put("news.tsv", data.news_tsv);
  put("behaviors.tsv", data.behaviors_tsv);
  put("truth.tsv", data.truth_tsv);
}

}  // namespace perconet
