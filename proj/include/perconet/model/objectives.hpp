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
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/graph.hpp"
#include "perconet/core/ops.hpp"
#include "perconet/model/perconet.hpp"

namespace perconet {

template <class T>
Var<T> click_probability(const PerCoNet<T>& model, Graph<T>& g, Var<T> user, Var<T> news) {
  return sigmoid(model.click_logit(g, user, news));
}

// Ranking loss of one training sample given the user vector and the news
// vectors of the clicked item followed by its H negatives.
template <class T>
Var<T> rec_loss_term(const PerCoNet<T>& model, Graph<T>& g, Var<T> user,
                     const std::vector<Var<T>>& positive_then_negatives) {
  std::vector<Var<T>> logits;
  logits.reserve(positive_then_negatives.size());
  for (Var<T> r : positive_then_negatives) logits.push_back(model.click_logit(g, user, r));
  return share_of_first_loss(concat_cols(logits));
}

// Batch mean of per-sample ranking losses.
template <class T>
Var<T> rec_loss(const std::vector<Var<T>>& terms) {
  if (terms.empty()) throw DegenerateInputError("rec_loss: empty batch");
  return mean(terms.size() == 1 ? terms.front() : concat_cols(terms));
}

template <class T>
struct CrossViews {
  Var<T> anchor;    // projection of the abstract view
  Var<T> positive;  // projection of the title view
};

// Abstract view: every history item with a non-empty abstract. Title view:
// titles after per-item dropout at `title_dropout` (at least one survives)
// in shuffled order. Returns nothing when no abstract is available.
template <class T>
std::optional<CrossViews<T>> cross_view_views(const PerCoNet<T>& model, Graph<T>& g,
                                              const std::vector<const TokenSequence*>& titles,
                                              const std::vector<const TokenSequence*>& abstracts,
                                              const EntityInput<T>& entities, Rng& rng,
                                              double title_dropout) {
  if (titles.empty()) throw ColdStartError("cross-view: empty history");
  std::vector<const TokenSequence*> abstract_view;
  for (const auto* a : abstracts)
    if (!a->empty()) abstract_view.push_back(a);
  if (abstract_view.empty()) return std::nullopt;

  std::vector<const TokenSequence*> title_view;
  std::bernoulli_distribution keep(1.0 - title_dropout);
  for (const auto* t : titles)
    if (keep(rng)) title_view.push_back(t);
  if (title_view.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, titles.size() - 1);
    title_view.push_back(titles[pick(rng)]);
  }
  std::shuffle(title_view.begin(), title_view.end(), rng);

  Var<T> ua = model.encode_user(g, abstract_view, Mask(abstract_view.size(), true), entities).u;
  Var<T> ut = model.encode_user(g, title_view, Mask(title_view.size(), true), entities).u;
  return CrossViews<T>{model.project(g, ua), model.project(g, ut)};
}

// InfoNCE over a batch of cross views; each user's title view is its
// positive, the other users' title views are its negatives.
template <class T>
Var<T> contrastive_loss(const std::vector<CrossViews<T>>& views, T tau) {
  if (!(tau > T{0})) throw ConfigError("contrastive loss: tau must be positive");
  if (views.size() < 2) throw DegenerateInputError("contrastive loss: need at least two users");
  std::vector<Var<T>> anchors, positives;
  for (const auto& v : views) {
    anchors.push_back(v.anchor);
    positives.push_back(v.positive);
  }
  return info_nce(concat_rows(anchors), concat_rows(positives), tau);
}

template <class T>
Var<T> joint_loss(Var<T> rec, Var<T> cl, T lambda) {
  if (lambda < T{0}) throw ConfigError("joint loss: lambda must be non-negative");
  return add(rec, scale(cl, lambda));
}

}  // namespace perconet
