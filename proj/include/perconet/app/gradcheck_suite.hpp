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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "perconet/core/grad_check.hpp"
#include "perconet/core/graph.hpp"
#include "perconet/core/layers.hpp"
#include "perconet/core/ops.hpp"
#include "perconet/model/config.hpp"
#include "perconet/model/objectives.hpp"
#include "perconet/model/perconet.hpp"
#include "perconet/persona/persona.hpp"
#include "perconet/text/vocabulary.hpp"

// Finite-difference suite over every primitive, both encoders, the click
// head, both objectives and every model variant, on small shapes.

namespace perconet {

namespace gradsuite {

inline Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data) v = u(rng);
  return t;
}

inline Tensor<double> scale_tensor(Tensor<double> t, double factor) {
  for (auto& v : t.data) v *= factor;
  return t;
}

// Values bounded away from zero, for functions with a kink there.
inline Tensor<double> off_zero_tensor(Shape shape, std::uint64_t seed) {
  Tensor<double> t = random_tensor(std::move(shape), seed, 0.1, 1.0);
  for (std::size_t i = 0; i < t.size(); i += 2) t.data[i] = -t.data[i];
  return t;
}

// Contracts any output against fixed random weights, so symmetric outputs
// (e.g. softmax rows) still carry a non-trivial gradient.
template <class T>
Var<T> contract(Var<T> y, std::uint64_t seed) {
  Tensor<T> w = random_tensor(y.shape(), seed).template cast<T>();
  return sum(mul(y, y.tape->constant(std::move(w))));
}

struct Suite {
  double tol;
  std::uint64_t seed;
  std::vector<GradCheckReport> reports;

  void check(const std::string& name, const Tensor<double>& point, const ScalarFn& fn) {
    reports.push_back(grad_check(fn, point, tol, name));
  }

  // One check per operand, the other operand held constant.
  void binary(const std::string& name, Shape a_shape, Shape b_shape,
              const std::function<Var<double>(Var<double>, Var<double>)>& op) {
    const Tensor<double> a = random_tensor(a_shape, seed + 11), b = random_tensor(b_shape, seed + 12);
    check(name + ".lhs", a, [&, b](Tape<double>& t, Var<double> x) { return contract(op(x, t.constant(b)), seed); });
    check(name + ".rhs", b, [&, a](Tape<double>& t, Var<double> x) { return contract(op(t.constant(a), x), seed); });
  }

  void unary(const std::string& name, const Tensor<double>& point,
             const std::function<Var<double>(Var<double>)>& op) {
    check(name, point, [&](Tape<double>&, Var<double> x) { return contract(op(x), seed + 1); });
  }

  void params(const std::string& prefix, ParamStore<double>& store, const StoreLossFn& loss) {
    for (auto& r : grad_check_params(store, loss, tol, prefix)) reports.push_back(std::move(r));
  }
};

inline void primitives(Suite& s) {
  const std::uint64_t seed = s.seed;
  s.binary("matmul", {3, 4}, {4, 2}, [](auto a, auto b) { return matmul(a, b); });
  s.binary("add", {3, 4}, {3, 4}, [](auto a, auto b) { return add(a, b); });
  s.binary("sub", {3, 4}, {3, 4}, [](auto a, auto b) { return sub(a, b); });
  s.binary("mul", {3, 4}, {3, 4}, [](auto a, auto b) { return mul(a, b); });
  s.binary("add_row", {3, 4}, {1, 4}, [](auto a, auto b) { return add_row(a, b); });
  s.binary("pairwise_add", {3, 4}, {2, 4}, [](auto a, auto b) { return pairwise_add(a, b); });
  s.binary("concat_cols", {3, 2}, {3, 3}, [](auto a, auto b) { return concat_cols(std::vector{a, b}); });
  s.binary("concat_rows", {2, 3}, {1, 3}, [](auto a, auto b) { return concat_rows(std::vector{a, b}); });
  s.binary("info_nce", {4, 3}, {4, 3}, [](auto a, auto b) { return info_nce(a, b, 0.5); });

  {
    const Tensor<double> q = random_tensor({4, 6}, seed + 24, -2, 2), k = random_tensor({4, 6}, seed + 25, -2, 2),
                         v = random_tensor({4, 6}, seed + 26);
    const Mask keys{true, false, true, true};
    s.check("attention_core.query", q, [&](Tape<double>& t, Var<double> x) {
      return contract(multi_head_attention_core(x, t.constant(k), t.constant(v), keys, 2), seed);
    });
    s.check("attention_core.key", k, [&](Tape<double>& t, Var<double> x) {
      return contract(multi_head_attention_core(t.constant(q), x, t.constant(v), keys, 2), seed);
    });
    s.check("attention_core.value", v, [&](Tape<double>& t, Var<double> x) {
      return contract(multi_head_attention_core(t.constant(q), t.constant(k), x, keys, 2), seed);
    });
  }
  {
    const Tensor<double> x = random_tensor({3, 4}, seed + 21), w = random_tensor({2, 4}, seed + 22),
                         b = random_tensor({2}, seed + 23);
    s.check("linear.input", x, [&](Tape<double>& t, Var<double> v) {
      return contract(linear(v, t.constant(w), t.constant(b)), seed);
    });
    s.check("linear.weight", w, [&](Tape<double>& t, Var<double> v) {
      return contract(linear(t.constant(x), v, t.constant(b)), seed);
    });
    s.check("linear.bias", b, [&](Tape<double>& t, Var<double> v) {
      return contract(linear(t.constant(x), t.constant(w), v), seed);
    });
  }

  const Tensor<double> m34 = random_tensor({3, 4}, seed + 31);
  s.unary("transpose", m34, [](auto x) { return transpose(x); });
  s.unary("reshape", m34, [](auto x) { return reshape(x, Shape{2, 6}); });
  s.unary("scale", m34, [](auto x) { return scale(x, -1.7); });
  s.unary("leaky_relu", off_zero_tensor({3, 4}, seed + 32), [](auto x) { return leaky_relu(x, 0.01); });
  s.unary("tanh", m34, [](auto x) { return tanh(x); });
  s.unary("sigmoid", scale_tensor(m34, 4.0), [](auto x) { return sigmoid(x); });
  s.unary("log", random_tensor({3, 4}, seed + 33, 0.2, 3.0), [](auto x) { return log(x); });
  s.unary("exp", m34, [](auto x) { return exp(x); });
  s.unary("sum", m34, [](auto x) { return sum(x); });
  s.unary("mean", m34, [](auto x) { return mean(x); });
  s.unary("softmax_masked", scale_tensor(m34, 3.0), [](auto x) { return softmax_masked(x, Mask{true, false, true, true}); });
  s.unary("mask_rows", m34, [](auto x) { return mask_rows(x, Mask{true, false, true}); });
  s.unary("slice_cols", m34, [](auto x) { return slice_cols(x, 1, 2); });
  s.unary("slice_rows", m34, [](auto x) { return slice_rows(x, 1, 2); });
  s.unary("gather_rows", random_tensor({5, 3}, seed + 34),
          [](auto x) { return gather_rows(x, {4, 0, 4, 2}, Mask{true, true, true, false}); });
  s.unary("dropout", m34, [seed](auto x) {
    Rng rng(seed);  // same mask on every evaluation
    return dropout(x, 0.3, true, rng);
  });
  s.check("share_of_first_loss", random_tensor({1, 5}, seed + 35, -3.0, 3.0),
          [](Tape<double>&, Var<double> x) { return share_of_first_loss(x); });

  // Layers, checked over their parameters plus the input held in the store.
  {
    ParamStore<double> store;
    Rng rng(seed);
    const ParamId input = store.add("input", random_tensor({4, 6}, seed + 41));
    const Dense dense = Dense::create(store, "dense", 6, 3, rng);
    s.params("dense/", store, [&](ParamStore<double>& p, bool backward) {
      Graph<double> g(p, false);
      Var<double> y = contract(dense(g, g.param(input)), seed);
      if (backward) g.tape().backward(y);
      return y.item();
    });
  }
  {
    ParamStore<double> store;
    Rng rng(seed);
    const ParamId input = store.add("input", random_tensor({4, 6}, seed + 42));
    const auto mha = MultiHeadSelfAttention::create(store, "mha", 6, 2, rng);
    s.params("multi_head_attention/", store, [&](ParamStore<double>& p, bool backward) {
      Graph<double> g(p, false);
      Var<double> y = contract(mha(g, g.param(input), Mask{true, true, false, true}), seed);
      if (backward) g.tape().backward(y);
      return y.item();
    });
  }
  {
    ParamStore<double> store;
    Rng rng(seed);
    const ParamId input = store.add("input", random_tensor({4, 6}, seed + 43));
    const auto pool = AdditiveAttention::create(store, "pool", 6, 5, rng);
    s.params("additive_attention/", store, [&](ParamStore<double>& p, bool backward) {
      Graph<double> g(p, false);
      Pooled<double> y = pool(g, g.param(input), Mask{true, false, true, true});
      Var<double> loss = add(contract(y.vector, seed), contract(y.weights, seed + 1));
      if (backward) g.tape().backward(loss);
      return loss.item();
    });
  }
}

// Small model shapes; every dimension differs so transposition mistakes
// cannot cancel.
inline Config small_config() {
  Config c;
  c.n_w = 5;
  c.n_u = 3;
  c.d_w = 6;
  c.d_e = 5;
  c.d_r = 8;
  c.d_att = 7;
  c.d_p = 4;
  c.heads = 2;
  c.top_g = 3;
  c.top_k = 2;
  c.n_e = 4;
  c.dropout = 0.0;
  return c;
}

struct Fixture {
  static constexpr std::size_t kVocab = 14;
  static constexpr std::size_t kEntities = 7;
  std::vector<TokenSequence> titles;
  std::vector<TokenSequence> abstracts;
  std::vector<Persona> personas;

  explicit Fixture(std::size_t n_w) {
    const std::vector<std::vector<std::size_t>> t = {
        {2, 5, 7}, {3, 4, 9, 11, 12}, {6, 8}, {10, 2, 13, 4}, {5, 6, 7, 8}, {9, 3}, {11, 13, 2}};
    const std::vector<std::vector<std::size_t>> a = {
        {4, 6, 8, 10}, {2, 3}, {12, 13, 5}, {7, 9, 11, 2, 3}, {}, {8, 4, 6}, {10, 12}};
    for (const auto& ids : t) titles.push_back(make_sequence(ids, n_w));
    for (const auto& ids : a) abstracts.push_back(make_sequence(ids, n_w));
    auto persona = [](std::string user, std::vector<std::size_t> ids, Mask mask) {
      return Persona{std::move(user), std::move(ids), std::move(mask), {}};
    };
    personas.push_back(persona("U1", {2, 5, 3, 0}, {true, true, true, false}));
    personas.push_back(persona("U2", {6, 0, 0, 0}, {true, false, false, false}));
    personas.push_back(persona("U3", {4, 3, 2, 6}, {true, true, true, true}));
  }

  std::vector<const TokenSequence*> history(std::size_t user, bool abstract = false) const {
    const auto& src = abstract ? abstracts : titles;
    return {&src[user], &src[(user + 2) % src.size()], &src[(user + 4) % src.size()]};
  }
};

// Joint objective of a two-user batch (one positive, two negatives each)
// plus the cross-view term for three users when the variant has it.
template <class T>
Var<T> joint_objective(const PerCoNet<T>& model, Graph<T>& g, const Fixture& f) {
  const Config& c = model.config();
  std::vector<Var<T>> terms;
  std::vector<EntityInput<T>> ents;
  for (std::size_t u = 0; u < 3; ++u) ents.push_back(model.entity_input(g, f.personas[u]));
  for (std::size_t u = 0; u < 2; ++u) {
    Var<T> user = model.encode_user(g, f.history(u), Mask{true, true, true}, ents[u]).u;
    std::vector<Var<T>> news;
    for (std::size_t k : {5 + u, 1 + u, 3 + u}) news.push_back(model.encode_news(g, f.titles[k], ents[u]).r);
    terms.push_back(rec_loss_term(model, g, user, news));
  }
  Var<T> rec = rec_loss(terms);
  if (!c.use_cl) return rec;
  std::vector<CrossViews<T>> views;
  Rng rng(11);  // identical title subset on every evaluation
  for (std::size_t u = 0; u < 3; ++u) {
    auto v = cross_view_views(model, g, f.history(u), f.history(u, true), ents[u], rng, 0.5);
    if (v) views.push_back(*v);
  }
  return joint_loss(rec, contrastive_loss(views, T(0.5)), T(c.lambda));
}

inline void model_checks(Suite& s) {
  const Fixture f(small_config().n_w);
  const std::uint64_t seed = s.seed;
  auto run = [&](const std::string& prefix, const Config& cfg,
                 const std::function<Var<double>(PerCoNet<double>&, Graph<double>&)>& body) {
    PerCoNet<double> model(cfg, Fixture::kVocab, Fixture::kEntities, seed);
    s.params(prefix, model.params(), [&](ParamStore<double>& p, bool backward) {
      Graph<double> g(p, false);
      Var<double> y = body(model, g);
      if (backward) g.tape().backward(y);
      return y.item();
    });
  };
  const Config base = small_config();
  run("news_encoder/", base, [&](auto& m, auto& g) {
    EntityInput<double> e = m.entity_input(g, f.personas[0]);
    NewsRepresentation<double> r = m.encode_news(g, f.titles[1], e);
    return add(contract(r.r, seed), contract(r.term_attention, seed + 2));
  });
  run("user_encoder/", base, [&](auto& m, auto& g) {
    EntityInput<double> e = m.entity_input(g, f.personas[2]);
    auto hist = f.history(0);
    hist.push_back(&f.titles[6]);
    UserRepresentation<double> u = m.encode_user(g, hist, Mask{true, true, false, true}, e);
    return add(contract(u.u, seed), contract(u.news_attention, seed + 3));
  });
  run("click_head/", base, [&](auto& m, auto& g) {
    EntityInput<double> e = m.entity_input(g, f.personas[0]);
    Var<double> u = m.encode_user(g, f.history(0), Mask{true, true, true}, e).u;
    Var<double> r = m.encode_news(g, f.titles[5], e).r;
    return click_probability(m, g, u, r);
  });
  run("rec_loss/", base, [&](auto& m, auto& g) {
    std::vector<Var<double>> terms;
    for (std::size_t u = 0; u < 2; ++u) {
      EntityInput<double> e = m.entity_input(g, f.personas[u]);
      Var<double> user = m.encode_user(g, f.history(u), Mask{true, true, true}, e).u;
      std::vector<Var<double>> news;
      for (std::size_t k : {5 + u, 1 + u, 3 + u, 0 + u}) news.push_back(m.encode_news(g, f.titles[k], e).r);
      terms.push_back(rec_loss_term(m, g, user, news));
    }
    return rec_loss(terms);
  });
  run("contrastive_loss/", base, [&](auto& m, auto& g) {
    std::vector<CrossViews<double>> views;
    Rng rng(5);
    for (std::size_t u = 0; u < 3; ++u) {
      EntityInput<double> e = m.entity_input(g, f.personas[u]);
      auto v = cross_view_views(m, g, f.history(u), f.history(u, true), e, rng, 0.5);
      if (v) views.push_back(*v);
    }
    return contrastive_loss(views, 0.5);
  });
  for (const auto& name : variant_names()) {
    Config cfg = base;
    apply_variant(cfg, name);
    run("variant:" + name + "/", cfg, [&](auto& m, auto& g) { return joint_objective(m, g, f); });
  }
}

}  // namespace gradsuite

// Every check of the suite, in a fixed order.
inline std::vector<GradCheckReport> run_gradient_suite(double tol = 1e-4, std::uint64_t seed = 7) {
  gradsuite::Suite s{tol, seed, {}};
  gradsuite::primitives(s);
  gradsuite::model_checks(s);
  return s.reports;
}

}  // namespace perconet
