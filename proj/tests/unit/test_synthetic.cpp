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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "perconet/data/synthetic.hpp"
#include "perconet/eval/evaluate.hpp"
#include "perconet/persona/persona.hpp"

namespace perconet {
namespace {

namespace fs = std::filesystem;

struct Loaded {
  Vocabulary vocab;
  EntityVocabulary entities;
  NewsStore news;
  std::vector<Impression> impressions;
  Warnings warnings;
};

Loaded load(const SyntheticData& data, const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("perconet_synth_" + tag);
  write_synthetic(data, dir);
  Loaded l;
  l.news = parse_news_file((dir / "news.tsv").string(), l.vocab, l.entities, {}, &l.warnings);
  l.impressions = parse_behaviors_file((dir / "behaviors.tsv").string(), l.news, 20, &l.warnings);
  return l;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST(Synthetic, SameSeedIsByteIdentical) {
  SyntheticOptions o;
  auto a = generate_synthetic(o), b = generate_synthetic(o);
  EXPECT_EQ(a.news_tsv, b.news_tsv);
  EXPECT_EQ(a.behaviors_tsv, b.behaviors_tsv);
  EXPECT_EQ(a.truth_tsv, b.truth_tsv);
  o.seed = 2;
  EXPECT_NE(generate_synthetic(o).behaviors_tsv, a.behaviors_tsv);

  const auto dir = fs::temp_directory_path() / "perconet_synth_bytes";
  write_synthetic(a, dir);
  EXPECT_EQ(slurp(dir / "news.tsv"), a.news_tsv);
  EXPECT_EQ(slurp(dir / "behaviors.tsv"), a.behaviors_tsv);
}

TEST(Synthetic, ParsesCleanlyWithRequestedShape) {
  SyntheticOptions o;
  auto data = generate_synthetic(o);
  auto l = load(data, "shape");
  EXPECT_TRUE(l.warnings.empty());
  EXPECT_EQ(l.news.size(), o.news);
  EXPECT_EQ(l.impressions.size(), o.users * o.impressions_per_user);
  EXPECT_EQ(l.entities.size(), o.entities + 2);
  std::set<std::string> users;
  for (std::size_t i = 0; i < l.impressions.size(); ++i) {
    const auto& imp = l.impressions[i];
    users.insert(imp.user);
    EXPECT_EQ(imp.candidates.size(), o.candidates);
    EXPECT_EQ(imp.history.size(), o.history_length);
    const auto clicks = std::count_if(imp.candidates.begin(), imp.candidates.end(), [](auto& c) { return c.label; });
    EXPECT_GE(clicks, 1);
    EXPECT_LT(static_cast<std::size_t>(clicks), imp.candidates.size());
    if (i) EXPECT_GT(imp.timestamp, l.impressions[i - 1].timestamp);
  }
  EXPECT_EQ(users.size(), o.users);
  for (const auto& item : l.news.items()) {
    EXPECT_GE(item.title_entities.size(), 1u);
    EXPECT_LE(item.title_entities.size(), o.max_entities_per_news);
    EXPECT_EQ(item.title_tokens.real_tokens(), o.title_length);
  }
}

TEST(Synthetic, RoundTripsThroughTheWriters) {
  auto l = load(generate_synthetic({}), "rt");
  const auto dir = fs::temp_directory_path() / "perconet_synth_rewrite";
  fs::create_directories(dir);
  write_news_file(l.news, (dir / "news.tsv").string());
  write_behaviors_file(l.impressions, l.news, (dir / "behaviors.tsv").string());
  Vocabulary v;
  EntityVocabulary e;
  auto news = parse_news_file((dir / "news.tsv").string(), v, e, {});
  auto imps = parse_behaviors_file((dir / "behaviors.tsv").string(), news);
  ASSERT_EQ(news.size(), l.news.size());
  for (std::size_t i = 0; i < news.size(); ++i) {
    EXPECT_EQ(news[i].title, l.news[i].title);
    EXPECT_EQ(news[i].title_entities, l.news[i].title_entities);
  }
  ASSERT_EQ(imps.size(), l.impressions.size());
  for (std::size_t i = 0; i < imps.size(); ++i) EXPECT_EQ(imps[i].candidates, l.impressions[i].candidates);
}

TEST(Synthetic, LatentRuleSeparatesClicks) {
  SyntheticOptions o;
  auto data = generate_synthetic(o);
  auto l = load(data, "latent");
  std::map<std::string, std::set<std::string>> interests;
  for (std::size_t u = 0; u < o.users; ++u)
    for (std::size_t e : data.user_interests[u]) interests[SyntheticData::user_id(u)].insert(SyntheticData::entity_id(e));
  auto report = evaluate([&](const Impression& imp) {
    std::vector<double> s;
    for (const auto& c : imp.candidates) {
      double hit = 0;
      for (const auto& m : l.news[c.news].title_entities) hit += interests[imp.user].count(m.wikidata_id);
      s.push_back(hit);
    }
    return s;
  }, l.impressions, {5});
  EXPECT_GT(report.auc, 0.95);

  // Every history item carries one of the user's interests.
  for (const auto& imp : l.impressions)
    for (std::size_t h : imp.history) {
      bool hit = false;
      for (const auto& m : l.news[h].title_entities) hit = hit || interests[imp.user].count(m.wikidata_id);
      EXPECT_TRUE(hit);
    }
}

TEST(Synthetic, PersonaSurfacesTheInterests) {
  SyntheticOptions o;
  auto data = generate_synthetic(o);
  auto l = load(data, "persona");
  std::size_t found = 0, users = 0;
  std::set<std::string> seen;
  for (const auto& imp : l.impressions) {
    if (!seen.insert(imp.user).second) continue;
    ++users;
    auto p = build_persona(imp.user, imp.history, l.news, {20, 4, 80});
    std::set<std::string> top{l.entities.token(p.entity_ids[0]), l.entities.token(p.entity_ids[1])};
    const auto& truth = data.user_interests[std::stoul(imp.user.substr(1)) - 1];
    bool all = true;
    for (std::size_t e : truth) all = all && top.count(SyntheticData::entity_id(e));
    found += all;
  }
  EXPECT_GE(static_cast<double>(found), 0.8 * static_cast<double>(users));
}

TEST(Synthetic, RejectsBadOptions) {
  SyntheticOptions o;
  o.entities = 1;
  EXPECT_THROW(generate_synthetic(o), ConfigError);
  o = {};
  o.interests_per_user = 0;
  EXPECT_THROW(generate_synthetic(o), ConfigError);
  o = {};
  o.surface_forms = 4;
  EXPECT_THROW(generate_synthetic(o), ConfigError);
  o = {};
  o.candidates = 1;
  EXPECT_THROW(generate_synthetic(o), ConfigError);
}

}  // namespace
}  // namespace perconet
