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
#include <vector>

#include "perconet/core/graph.hpp"
#include "perconet/data/mind.hpp"
#include "perconet/eval/evaluate.hpp"
#include "perconet/model/objectives.hpp"
#include "perconet/model/perconet.hpp"
#include "perconet/persona/persona.hpp"

namespace perconet {

template <class T>
std::vector<const TokenSequence*> history_inputs(const PerCoNet<T>& model, const NewsStore& store,
                                                 const std::vector<std::size_t>& history) {
  std::vector<const TokenSequence*> out;
  out.reserve(history.size());
  for (std::size_t id : history) out.push_back(&store[id].input(model.config().abstract_as_title));
  return out;
}

// User vector for an impression; a user without history falls back to the
// zero vector (its persona is then the UNK entity as well).
template <class T>
Var<T> user_vector(const PerCoNet<T>& model, Graph<T>& g, const NewsStore& store, const Impression& imp,
                   const EntityInput<T>& entities) {
  if (imp.history.empty()) return g.constant(Tensor<T>({1, model.config().d_r}));
  const auto inputs = history_inputs(model, store, imp.history);
  return model.encode_user(g, inputs, Mask(inputs.size(), true), entities).u;
}

// Pre-sigmoid click scores of every candidate of an impression, each candidate
// encoded with the impression user's persona. Eval mode, no gradients.
// Ranking by the logit keeps candidates apart where a float sigmoid rounds to 1.
template <class T>
std::vector<double> score_impression(const PerCoNet<T>& model, const NewsStore& store, const Impression& imp) {
  Graph<T> g(model.params());
  const Persona persona = build_persona(imp.user, imp.history, store, model.config().persona_options());
  const EntityInput<T> entities = model.entity_input(g, persona);
  Var<T> u = user_vector(model, g, store, imp, entities);
  std::vector<double> scores;
  scores.reserve(imp.candidates.size());
  for (const auto& c : imp.candidates) {
    const auto& text = store[c.news].input(model.config().abstract_as_title);
    Var<T> r = model.encode_news(g, text, entities).r;
    scores.push_back(static_cast<double>(model.click_logit(g, u, r).item()));
  }
  return scores;
}

template <class T>
Scorer model_scorer(const PerCoNet<T>& model, const NewsStore& store) {
  return [&model, &store](const Impression& imp) { return score_impression(model, store, imp); };
}

}  // namespace perconet
