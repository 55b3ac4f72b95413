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
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "perconet/core/checkpoint.hpp"
#include "perconet/data/synthetic.hpp"
#include "perconet/train/trainer.hpp"

namespace perconet {
namespace {

namespace fs = std::filesystem;

Config small_train_config() {
  Config c;
  c.d_w = c.d_e = c.d_r = c.d_att = c.d_p = 8;
  c.heads = 2;
  c.n_w = 8, c.n_u = 8, c.top_g = 8, c.top_k = 2;
  c.batch_size = 8, c.lr = 3e-3, c.dropout = 0.1, c.epochs = 1, c.seed = 5;
  return c;
}

struct Corpus {
  Vocabulary vocab;
  EntityVocabulary entities;
  NewsStore news;
  std::vector<Impression> train, dev;
};

std::unique_ptr<Corpus> synthetic_corpus(std::size_t users, std::uint64_t seed, const Config& c,
                                         SyntheticOptions o = {}) {
  o.users = users;
  o.news = 80;
  o.seed = seed;
  const auto dir = fs::temp_directory_path() / ("perconet_trainer_" + std::to_string(users) + "_" +
                                                std::to_string(seed));
  write_synthetic(generate_synthetic(o), dir);
  auto corpus = std::make_unique<Corpus>();
  NewsParseOptions po;
  po.n_w = c.n_w;
  corpus->news = parse_news_file((dir / "news.tsv").string(), corpus->vocab, corpus->entities, po);
  auto imps = parse_behaviors_file((dir / "behaviors.tsv").string(), corpus->news, c.n_u);
  std::tie(corpus->train, corpus->dev) = split_by_time(imps, c.dev_fraction);
  return corpus;
}

Trainer make_trainer(const Corpus& data, const Config& c) {
  return Trainer(c, data.news, data.train, data.dev, data.vocab.size(), data.entities.size());
}

std::vector<float> flat_params(const ParamStore<float>& p) {
  std::vector<float> out;
  for (const auto& e : p.entries()) out.insert(out.end(), e.tensor.data.begin(), e.tensor.data.end());
  return out;
}

TEST(Trainer, SameSeedRunsAreBitIdentical) {
  const Config c = small_train_config();
  auto data = synthetic_corpus(12, 3, c);
  Trainer a = make_trainer(*data, c), b = make_trainer(*data, c);
  for (int e = 0; e < 2; ++e) {
    auto ra = a.run_epoch(), rb = b.run_epoch();
    EXPECT_EQ(ra.to_json().dump(), rb.to_json().dump());
    EXPECT_EQ(ra.rec_loss, rb.rec_loss);
  }
  EXPECT_EQ(serialize_checkpoint(a.model().params()), serialize_checkpoint(b.model().params()));
}

TEST(Trainer, ZeroLambdaMatchesDisabledContrast) {
  Config with = small_train_config();
  with.lambda = 0.0;
  Config without = with;
  without.use_cl = false;
  auto data = synthetic_corpus(12, 4, with);
  Trainer a = make_trainer(*data, with), b = make_trainer(*data, without);
  a.run_epoch();
  b.run_epoch();
  for (const auto& e : b.model().params().entries()) {
    const auto id = a.model().params().find(e.name);
    ASSERT_TRUE(id) << e.name;
    EXPECT_EQ(a.model().params()[*id].data, e.tensor.data) << e.name;
  }
}

TEST(Trainer, TapeMemoryGrowsLinearlyWithBatch) {
  Config c = small_train_config();
  c.dropout = 0.0;
  auto data = synthetic_corpus(80, 5, c);
  Rng rng(1);
  auto samples = make_training_samples(data->train, c.negatives, rng);
  ASSERT_GE(samples.size(), 32u);
  // One sample per user, all with the most common history length, keeps the
  // per-sample cost uniform.
  std::map<std::size_t, std::size_t> lengths;
  for (const auto& s : samples) ++lengths[data->train[s.impression].history.size()];
  const std::size_t common =
      std::max_element(lengths.begin(), lengths.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
  std::vector<TrainingSample> distinct;
  std::vector<std::string> users;
  for (const auto& s : samples) {
    const auto& imp = data->train[s.impression];
    const auto& u = imp.user;
    if (imp.history.size() != common) continue;
    if (std::find(users.begin(), users.end(), u) != users.end()) continue;
    users.push_back(u);
    distinct.push_back(s);
  }
  ASSERT_GE(distinct.size(), 12u);
  auto bytes = [&](std::size_t n) {
    Trainer t = make_trainer(*data, c);
    return static_cast<double>(
        t.step(std::vector<TrainingSample>(distinct.begin(), distinct.begin() + static_cast<std::ptrdiff_t>(n)))
            .tape_bytes);
  };
  const double b3 = bytes(3), b6 = bytes(6), b12 = bytes(12);
  const double first = b6 - b3, second = b12 - b6;
  EXPECT_GT(first, 0.0);
  EXPECT_NEAR(second / first, 2.0, 0.3);
}

TEST(Trainer, OverfitsTwentyUsers) {
  Config c = small_train_config();
  c.d_w = c.d_e = c.d_r = c.d_att = c.d_p = 16;
  c.epochs = 50;
  c.dropout = 0.0;
  c.dev_fraction = 0.0;
  // Noise-free clicks: a label is 1 exactly when the candidate overlaps.
  SyntheticOptions clean;
  clean.click_if_match = 1.0;
  clean.click_otherwise = 0.0;
  auto data = synthetic_corpus(20, 6, c, clean);
  Trainer t = make_trainer(*data, c);
  Rng rng(2);
  auto probe = make_training_samples(data->train, c.negatives, rng);
  probe.resize(std::min<std::size_t>(probe.size(), c.batch_size));
  const double initial = Trainer(c, data->news, data->train, {}, data->vocab.size(), data->entities.size())
                             .step(probe)
                             .joint;
  auto log = t.run();
  EXPECT_LT(log.back().joint_loss, 0.2 * initial) << "initial " << initial;
}

TEST(Trainer, NonFiniteLossAbortsWithStepIndex) {
  const Config c = small_train_config();
  auto data = synthetic_corpus(12, 7, c);
  Trainer t = make_trainer(*data, c);
  auto& w = t.model().params().at("click.query");
  w.data[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    t.run_epoch();
    FAIL() << "expected divergence";
  } catch (const TrainingDivergence& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("step 1"), std::string::npos) << what;
    EXPECT_NE(what.find("rec_loss"), std::string::npos) << what;
  }
}

TEST(Trainer, CheckpointRoundTripPreservesMetrics) {
  const Config c = small_train_config();
  auto data = synthetic_corpus(12, 8, c);
  Trainer t = make_trainer(*data, c);
  t.run_epoch();
  const auto path = (fs::temp_directory_path() / "perconet_trainer.ckpt").string();
  save_checkpoint(t.model().params(), path);
  PerCoNet<float> fresh(c, data->vocab.size(), data->entities.size(), 999);
  load_checkpoint(fresh.params(), path);
  auto before = evaluate(model_scorer(t.model(), data->news), data->dev, {5, 10});
  auto after = evaluate(model_scorer(fresh, data->news), data->dev, {5, 10});
  EXPECT_EQ(before, after);
  EXPECT_GT(before.impressions, 0u);
}

TEST(Variants, ParameterCountsShrinkWithAblation) {
  Config full = small_train_config();
  auto count = [&](const std::string& v) {
    Config c = full;
    apply_variant(c, v);
    return PerCoNet<float>(c, 40, 30, 1).params().scalar_count();
  };
  EXPECT_LT(count("no-both"), count("full"));
  EXPECT_LT(count("no-cl"), count("full"));
  EXPECT_LT(count("no-persona"), count("full"));
  EXPECT_EQ(count("no-cl+abstract"), count("no-cl"));
  EXPECT_EQ(count("no-both+abstract"), count("no-both"));
  Config bad = full;
  EXPECT_THROW(apply_variant(bad, "no-everything"), ConfigError);
  bad.abstract_as_title = true;
  EXPECT_THROW(validate(bad), ConfigError);
}

TEST(Variants, NoPersonaEqualsFullModelWithPseudoEntityPersona) {
  Config full = small_train_config();
  Config plain = full;
  apply_variant(plain, "no-persona");
  PerCoNet<double> a(full, 20, 10, 3), b(plain, 20, 10, 4);
  for (const auto& e : b.params().entries()) {
    if (e.name == "embed.pseudo_entity") continue;
    b.params().at(e.name).data = a.params().at(e.name).data;
  }
  // Entity 7 of the full model carries the pseudo-entity vector.
  const auto& pseudo = b.params().at("embed.pseudo_entity").data;
  auto& table = a.params().at("embed.entities");
  std::copy(pseudo.begin(), pseudo.end(), table.data.begin() + 7 * full.d_e);

  const auto t1 = make_sequence({3, 4, 5}, full.n_w), t2 = make_sequence({6, 2}, full.n_w);
  Persona rich{"u", {7, 0, 0}, {true, false, false}, {{}, {}, {}}};
  Persona other{"u", {2, 5, 9}, {true, true, true}, {{}, {}, {}}};
  Graph<double> ga(a.params()), gb(b.params());
  auto ea = a.entity_input(ga, rich);
  auto eb = b.entity_input(gb, other);
  EXPECT_EQ(a.encode_news(ga, t1, ea).r.value().data, b.encode_news(gb, t1, eb).r.value().data);
  EXPECT_EQ(a.encode_user(ga, {&t1, &t2}, Mask{true, true}, ea).u.value().data,
            b.encode_user(gb, {&t1, &t2}, Mask{true, true}, eb).u.value().data);
}

TEST(Variants, AbstractAsTitleFeedsCombinedText) {
  Config c = small_train_config();
  apply_variant(c, "no-cl+abstract");
  auto data = synthetic_corpus(12, 9, c);
  const auto& item = data->news[0];
  EXPECT_EQ(&item.input(true), &item.combined_tokens);
  EXPECT_EQ(item.combined_tokens.ids[0], item.title_tokens.ids[0]);
  Trainer t = make_trainer(*data, c);
  EXPECT_NO_THROW(t.run_epoch());
}

}  // namespace
}  // namespace perconet
