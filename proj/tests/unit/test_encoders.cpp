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
#include <limits>
#include <numeric>
#include <vector>

#include "perconet/model/objectives.hpp"
#include "perconet/model/perconet.hpp"

namespace perconet {
namespace {

// Plain row-major matrices for the reference evaluation.
struct Mat {
  std::size_t r = 0, c = 0;
  std::vector<double> a;
  Mat(std::size_t rows, std::size_t cols) : r(rows), c(cols), a(rows * cols, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * c + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * c + j]; }
};

Mat from(const Tensor<double>& t) {
  Mat m(t.rows(), t.cols());
  m.a = t.data;
  return m;
}

Mat mm(const Mat& x, const Mat& y) {
  Mat z(x.r, y.c);
  for (std::size_t i = 0; i < x.r; ++i)
    for (std::size_t j = 0; j < y.c; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < x.c; ++k) s += x(i, k) * y(k, j);
      z(i, j) = s;
    }
  return z;
}

Mat tr(const Mat& x) {
  Mat z(x.c, x.r);
  for (std::size_t i = 0; i < x.r; ++i)
    for (std::size_t j = 0; j < x.c; ++j) z(j, i) = x(i, j);
  return z;
}

Mat map(Mat x, double (*f)(double)) {
  for (auto& v : x.a) v = f(v);
  return x;
}

double leaky(double v) { return v > 0 ? v : 0.01 * v; }
double tanh_(double v) { return std::tanh(v); }

struct Reference {
  const ParamStore<double>& p;
  Mat w(const std::string& name) const { return from(const_cast<ParamStore<double>&>(p).at(name)); }

  Mat dense(const Mat& x, const std::string& name) const {
    Mat y = mm(x, tr(w(name + ".weight")));
    Mat b = w(name + ".bias");
    for (std::size_t i = 0; i < y.r; ++i)
      for (std::size_t j = 0; j < y.c; ++j) y(i, j) += b.a[j];
    return y;
  }

  static std::vector<double> softmax(const std::vector<double>& logits, const Mask& mask) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i)
      if (mask[i]) hi = std::max(hi, logits[i]);
    std::vector<double> out(logits.size(), 0.0);
    double z = 0;
    for (std::size_t i = 0; i < logits.size(); ++i)
      if (mask[i]) z += out[i] = std::exp(logits[i] - hi);
    for (auto& v : out) v /= z;
    return out;
  }

  Mat self_attention(const Mat& x, const Mask& mask, const std::string& name, std::size_t heads) const {
    Mat q = mm(x, tr(w(name + ".query"))), k = mm(x, tr(w(name + ".key"))), v = mm(x, tr(w(name + ".value")));
    const std::size_t dh = x.c / heads;
    Mat joined(x.r, x.c);
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < x.r; ++i) {
        std::vector<double> logits(x.r);
        for (std::size_t j = 0; j < x.r; ++j) {
          double s = 0;
          for (std::size_t d = 0; d < dh; ++d) s += q(i, h * dh + d) * k(j, h * dh + d);
          logits[j] = s / std::sqrt(static_cast<double>(dh));
        }
        auto a = softmax(logits, mask);
        for (std::size_t j = 0; j < x.r; ++j)
          for (std::size_t d = 0; d < dh; ++d) joined(i, h * dh + d) += a[j] * v(j, h * dh + d);
      }
    Mat out = dense(joined, name + ".out");
    for (std::size_t i = 0; i < x.r; ++i)
      if (!mask[i])
        for (std::size_t j = 0; j < x.c; ++j) out(i, j) = 0;
    return out;
  }

  std::pair<Mat, std::vector<double>> pool(const Mat& items, const std::string& name) const {
    Mat hidden = map(dense(items, name), tanh_);
    Mat logits = mm(w(name + ".query"), tr(hidden));
    auto weights = softmax(logits.a, Mask(items.r, true));
    Mat out(1, items.c);
    for (std::size_t i = 0; i < items.r; ++i)
      for (std::size_t j = 0; j < items.c; ++j) out(0, j) += weights[i] * items(i, j);
    return {out, weights};
  }

  Mat news(const Mat& words, const Mask& mask, const Mat& entities, std::size_t heads) const {
    Mat t = self_attention(dense(map(dense(words, "news.dense_in"), leaky), "news.dense_out"), mask,
                           "news.mha", heads);
    Mat e = map(dense(entities, "news.entity_proj"), leaky);
    Mat logits = mm(mm(e, w("news.bilinear")), tr(t));
    Mat summaries(e.r, t.c);
    for (std::size_t i = 0; i < e.r; ++i) {
      auto a = softmax(std::vector<double>(logits.a.begin() + i * t.r, logits.a.begin() + (i + 1) * t.r), mask);
      for (std::size_t j = 0; j < t.r; ++j)
        for (std::size_t d = 0; d < t.c; ++d) summaries(i, d) += a[j] * t(j, d);
    }
    return pool(summaries, "news.pool").first;
  }

  Mat user(const std::vector<Mat>& news_vectors, const Mat& entities, std::size_t heads) const {
    const std::size_t n = news_vectors.size(), dr = news_vectors[0].c;
    Mat stacked(n, dr);
    for (std::size_t j = 0; j < n; ++j) std::copy_n(news_vectors[j].a.begin(), dr, stacked.a.begin() + j * dr);
    Mat z = self_attention(stacked, Mask(n, true), "user.mha", heads);
    Mat e = map(dense(entities, "user.entity_proj"), leaky);
    Mat v = w("user.pair.weight"), b = w("user.pair.bias"), q = w("user.pair.query");
    Mat summaries(e.r, dr);
    for (std::size_t i = 0; i < e.r; ++i) {
      std::vector<double> logits(n);
      for (std::size_t j = 0; j < n; ++j) {
        Mat joined(1, 2 * dr);
        for (std::size_t d = 0; d < dr; ++d) joined(0, d) = e(i, d), joined(0, dr + d) = z(j, d);
        Mat h = mm(joined, tr(v));
        for (std::size_t k = 0; k < h.c; ++k) h.a[k] = leaky(h.a[k] + b.a[k]);
        logits[j] = mm(h, tr(q)).a[0];
      }
      auto a = softmax(logits, Mask(n, true));
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t d = 0; d < dr; ++d) summaries(i, d) += a[j] * z(j, d);
    }
    return pool(summaries, "user.pool").first;
  }

  double click(const Mat& u, const Mat& r) const {
    Mat joined(1, u.c + r.c);
    std::copy(u.a.begin(), u.a.end(), joined.a.begin());
    std::copy(r.a.begin(), r.a.end(), joined.a.begin() + u.c);
    Mat h = map(dense(joined, "click.hidden"), leaky);
    return 1.0 / (1.0 + std::exp(-mm(h, tr(w("click.query"))).a[0]));
  }
};

Config tiny_config() {
  Config c;
  c.n_w = 4, c.n_u = 3, c.d_w = 6, c.d_e = 5, c.d_r = 8, c.d_att = 7, c.d_p = 4;
  c.heads = 2, c.top_g = 3, c.top_k = 2, c.n_e = 4, c.dropout = 0.0;
  return c;
}

// Model with every parameter, biases included, drawn away from its init.
PerCoNet<double> random_model(const Config& c, std::uint64_t seed, std::size_t vocab = 12, std::size_t ents = 9) {
  PerCoNet<double> m(c, vocab, ents, seed);
  Rng rng(seed + 100);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    auto& t = m.params()[ParamId{i}];
    for (auto& v : t.data) v = u(rng);
  }
  return m;
}

Tensor<double> var_value(Var<double> v) { return v.value(); }

Mat rows_of(const Tensor<double>& table, const std::vector<std::size_t>& ids) {
  Mat m(ids.size(), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < table.cols(); ++j) m(i, j) = table(ids[i], j);
  return m;
}

Persona persona_of(const std::vector<std::size_t>& ids, std::size_t capacity) {
  Persona p{"u", std::vector<std::size_t>(capacity, 0), Mask(capacity, false), std::vector<std::vector<std::string>>(capacity)};
  for (std::size_t i = 0; i < ids.size(); ++i) p.entity_ids[i] = ids[i], p.mask[i] = true;
  return p;
}

void expect_near_all(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

TEST(NewsEncoder, MatchesStraightLineReference) {
  const Config c = tiny_config();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto model = random_model(c, seed);
    Graph<double> g(model.params());
    const auto text = make_sequence({3, 7, 5}, c.n_w);
    const std::vector<std::size_t> ents{4, 6};
    auto input = model.entity_input(g, persona_of(ents, c.n_e));
    auto rep = model.encode_news(g, text, input);
    Reference ref{model.params()};
    Mat words = rows_of(model.params().at("embed.tokens"), text.ids);
    for (std::size_t j = 0; j < words.c; ++j) words(3, j) = 0;
    Mat want = ref.news(words, text.mask, rows_of(model.params().at("embed.entities"), ents), c.heads);
    expect_near_all(rep.r.value().data, want.a, 1e-6);
  }
}

TEST(UserEncoder, MatchesStraightLineReference) {
  const Config c = tiny_config();
  for (std::uint64_t seed : {4u, 5u}) {
    auto model = random_model(c, seed);
    Graph<double> g(model.params());
    const auto a = make_sequence({2, 9}, c.n_w), b = make_sequence({5, 6, 11, 3}, c.n_w);
    const std::vector<std::size_t> ents{2, 8};
    auto input = model.entity_input(g, persona_of(ents, c.n_e));
    auto rep = model.encode_user(g, {&a, &b}, Mask{true, true}, input);

    Reference ref{model.params()};
    const auto& tokens = model.params().at("embed.tokens");
    Mat e = rows_of(model.params().at("embed.entities"), ents);
    std::vector<Mat> news;
    for (const auto* s : {&a, &b}) {
      Mat words = rows_of(tokens, s->ids);
      for (std::size_t i = 0; i < s->ids.size(); ++i)
        if (!s->mask[i])
          for (std::size_t j = 0; j < words.c; ++j) words(i, j) = 0;
      news.push_back(ref.news(words, s->mask, e, c.heads));
    }
    expect_near_all(rep.u.value().data, ref.user(news, e, c.heads).a, 1e-6);
  }
}

TEST(ClickHead, MatchesStraightLineReference) {
  const Config c = tiny_config();
  auto model = random_model(c, 9);
  Graph<double> g(model.params());
  Rng rng(10);
  auto u = init::uniform<double>({1, c.d_r}, 1.0, rng), r = init::uniform<double>({1, c.d_r}, 1.0, rng);
  const double got = click_probability(model, g, g.constant(u), g.constant(r)).item();
  EXPECT_NEAR(got, Reference{model.params()}.click(from(u), from(r)), 1e-7);
}

TEST(ClickHead, ZeroQueryGivesOneHalfAndRangeIsOpen) {
  const Config c = tiny_config();
  auto model = random_model(c, 11);
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    Graph<double> g(model.params());
    auto u = g.constant(init::uniform<double>({1, c.d_r}, 3.0, rng));
    auto r = g.constant(init::uniform<double>({1, c.d_r}, 3.0, rng));
    const double p = click_probability(model, g, u, r).item();
    ASSERT_GT(p, 0.0);
    ASSERT_LT(p, 1.0);
  }
  auto& q = model.params().at("click.query");
  std::fill(q.data.begin(), q.data.end(), 0.0);
  Graph<double> g(model.params());
  auto u = g.constant(init::uniform<double>({1, c.d_r}, 3.0, rng));
  EXPECT_EQ(click_probability(model, g, u, u).item(), 0.5);
}

TEST(NewsEncoder, SingleEntityTakesFullWeight) {
  const Config c = tiny_config();
  auto model = random_model(c, 13);
  Graph<double> g(model.params());
  auto rep = model.encode_news(g, make_sequence({4, 5}, c.n_w), model.entity_input(g, persona_of({3}, c.n_e)));
  ASSERT_EQ(rep.entity_attention.size(), 1u);
  EXPECT_EQ(rep.entity_attention.value().data[0], 1.0);
}

TEST(NewsEncoder, EntityPermutationPermutesTermAttention) {
  const Config c = tiny_config();
  auto model = random_model(c, 14);
  Graph<double> g(model.params());
  const auto text = make_sequence({3, 4, 5, 6}, c.n_w);
  auto a = model.encode_news(g, text, model.entity_input(g, persona_of({2, 5, 7}, c.n_e)));
  auto b = model.encode_news(g, text, model.entity_input(g, persona_of({7, 2, 5}, c.n_e)));
  expect_near_all(a.r.value().data, b.r.value().data, 1e-6);
  const std::vector<std::size_t> moved{1, 2, 0};  // row i of a is row moved[i] of b
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < c.n_w; ++j)
      EXPECT_NEAR(a.term_attention.value()(i, j), b.term_attention.value()(moved[i], j), 1e-12);
}

TEST(NewsEncoder, NoTokensIsDegenerate) {
  const Config c = tiny_config();
  auto model = random_model(c, 15);
  Graph<double> g(model.params());
  EXPECT_THROW(model.encode_news(g, make_sequence({}, c.n_w), model.entity_input(g, persona_of({2}, c.n_e))),
               DegenerateInputError);
}

TEST(UserEncoder, SingleHistoryItemPassesThroughAttention) {
  const Config c = tiny_config();
  auto model = random_model(c, 16);
  Graph<double> g(model.params());
  const auto a = make_sequence({2, 9, 4}, c.n_w);
  auto input = model.entity_input(g, persona_of({2, 8}, c.n_e));
  auto rep = model.encode_user(g, {&a}, Mask{true}, input);
  for (double w : rep.news_attention.value().data) EXPECT_EQ(w, 1.0);
  Reference ref{model.params()};
  Mat r = from(model.encode_news(g, a, input).r.value());
  Mat z = ref.self_attention(r, Mask{true}, "user.mha", c.heads);
  expect_near_all(rep.u.value().data, z.a, 1e-9);
}

TEST(UserEncoder, InvariantToHistoryAndPersonaOrder) {
  const Config c = tiny_config();
  auto model = random_model(c, 17);
  Graph<double> g(model.params());
  const auto a = make_sequence({2, 9}, c.n_w), b = make_sequence({5, 6, 11}, c.n_w), d = make_sequence({7}, c.n_w);
  auto base = model.encode_user(g, {&a, &b, &d}, Mask{true, true, true}, model.entity_input(g, persona_of({2, 4, 6}, c.n_e)));
  auto hist = model.encode_user(g, {&d, &a, &b}, Mask{true, true, true}, model.entity_input(g, persona_of({2, 4, 6}, c.n_e)));
  auto pers = model.encode_user(g, {&a, &b, &d}, Mask{true, true, true}, model.entity_input(g, persona_of({6, 2, 4}, c.n_e)));
  expect_near_all(base.u.value().data, hist.u.value().data, 1e-6);
  expect_near_all(base.u.value().data, pers.u.value().data, 1e-6);
}

TEST(UserEncoder, MaskedHistoryIsIgnoredAndEmptyIsColdStart) {
  const Config c = tiny_config();
  auto model = random_model(c, 18);
  Graph<double> g(model.params());
  const auto a = make_sequence({2, 9}, c.n_w), b = make_sequence({5, 6, 11}, c.n_w);
  auto input = model.entity_input(g, persona_of({3}, c.n_e));
  auto one = model.encode_user(g, {&a}, Mask{true}, input);
  auto masked = model.encode_user(g, {&a, &b}, Mask{true, false}, input);
  EXPECT_EQ(one.u.value().data, masked.u.value().data);
  EXPECT_THROW(model.encode_user(g, {&a}, Mask{false}, input), ColdStartError);
  EXPECT_THROW(model.encode_user(g, {&a}, Mask{true, true}, input), DimensionError);
}

TEST(Encoders, AttentionDistributionsNormalise) {
  Config c = tiny_config();
  auto model = random_model(c, 19, 30, 20);
  Rng rng(20);
  std::uniform_int_distribution<std::size_t> tok(0, 29), len(1, 4), ent(2, 19), ne(0, 4), nh(1, 3);
  for (int trial = 0; trial < 1000; ++trial) {
    Graph<double> g(model.params());
    std::vector<TokenSequence> texts;
    const std::size_t n = nh(rng);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> ids;
      const std::size_t L = len(rng);
      while (ids.size() < L) ids.push_back(tok(rng));
      ids[0] = std::max<std::size_t>(ids[0], 1);
      texts.push_back(make_sequence(ids, c.n_w));
    }
    std::vector<std::size_t> ents;
    const std::size_t m = ne(rng);
    while (ents.size() < m) {
      const std::size_t e = ent(rng);
      if (std::find(ents.begin(), ents.end(), e) == ents.end()) ents.push_back(e);
    }
    auto input = model.entity_input(g, persona_of(ents, c.n_e));
    std::vector<const TokenSequence*> hist;
    for (const auto& t : texts) hist.push_back(&t);
    auto news = model.encode_news(g, texts[0], input);
    auto user = model.encode_user(g, hist, Mask(n, true), input);
    const std::size_t rows = std::max<std::size_t>(m, 1);
    ASSERT_NEAR(sum_of(news.entity_attention.value().data), 1.0, 1e-9);
    ASSERT_NEAR(sum_of(user.entity_attention.value().data), 1.0, 1e-9);
    for (std::size_t i = 0; i < rows; ++i) {
      double terms = 0, items = 0;
      for (std::size_t j = 0; j < c.n_w; ++j) {
        const double w = news.term_attention.value()(i, j);
        ASSERT_GE(w, 0.0);
        if (!texts[0].mask[j]) ASSERT_EQ(w, 0.0);
        terms += w;
      }
      for (std::size_t j = 0; j < n; ++j) {
        ASSERT_GE(user.news_attention.value()(i, j), 0.0);
        items += user.news_attention.value()(i, j);
      }
      ASSERT_NEAR(terms, 1.0, 1e-9);
      ASSERT_NEAR(items, 1.0, 1e-9);
    }
  }
}

TEST(Encoders, ColdStartUsesUnkRowAndPersonaFreeUsesPseudoEntity) {
  Config c = tiny_config();
  auto model = random_model(c, 21);
  Graph<double> g(model.params());
  auto cold = model.entity_input(g, persona_of({}, c.n_e));
  ASSERT_EQ(cold.embeddings.rows(), 1u);
  const auto& table = model.params().at("embed.entities");
  for (std::size_t j = 0; j < c.d_e; ++j) EXPECT_EQ(cold.embeddings.value()(0, j), table(Vocabulary::kUnk, j));

  Config free = c;
  apply_variant(free, "no-persona");
  auto plain = random_model(free, 22);
  Graph<double> h(plain.params());
  auto a = plain.entity_input(h, persona_of({2, 3}, c.n_e));
  auto b = plain.entity_input(h, persona_of({}, c.n_e));
  EXPECT_EQ(a.embeddings.value().data, plain.params().at("embed.pseudo_entity").data);
  EXPECT_EQ(a.embeddings.value().data, b.embeddings.value().data);
  EXPECT_FALSE(plain.params().find("embed.entities"));
}

TEST(Encoders, EvalModeIsDeterministic) {
  const Config c = tiny_config();
  auto model = random_model(c, 23);
  const auto a = make_sequence({2, 9}, c.n_w), b = make_sequence({5, 6, 11}, c.n_w);
  std::vector<double> first;
  for (int run = 0; run < 2; ++run) {
    Graph<double> g(model.params());
    auto input = model.entity_input(g, persona_of({3, 5}, c.n_e));
    auto u = model.encode_user(g, {&a, &b}, Mask{true, true}, input).u.value().data;
    if (run == 0) first = u;
    else EXPECT_EQ(first, u);
  }
}

TEST(Encoders, HeadsMustDivideWidth) {
  Config c = tiny_config();
  c.heads = 3;
  EXPECT_THROW(PerCoNet<double>(c, 10, 10, 1), ConfigError);
}

}  // namespace
}  // namespace perconet
