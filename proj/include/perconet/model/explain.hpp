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
#include <numeric>
#include <string>
#include <vector>

#include "perconet/core/graph.hpp"
#include "perconet/data/mind.hpp"
#include "perconet/model/objectives.hpp"
#include "perconet/model/perconet.hpp"
#include "perconet/model/scoring.hpp"
#include "perconet/persona/persona.hpp"
#include "perconet/text/vocabulary.hpp"

// Entity attribution of recommendations: for each top-ranked candidate, the
// persona entities ordered by their pooling weight in the news encoder, each
// with the candidate terms it attended to most.

namespace perconet {

struct TermWeight {
  std::string term;
  double weight = 0.0;
};

struct EntityAttribution {
  std::string entity;  // WikiData id, "[UNK]" or "[PSEUDO]"
  std::string label;
  double weight = 0.0;
  std::vector<TermWeight> terms;
};

struct CandidateExplanation {
  std::string news_id;
  std::string title;
  double score = 0.0;
  std::vector<EntityAttribution> entities;  // by descending weight
};

struct Explanation {
  std::string user;
  std::string persona_line;
  bool cold_start = false;
  bool persona_free = false;
  std::vector<CandidateExplanation> candidates;  // by descending score

  std::string to_text() const {
    std::string out = "user: " + user + "\n";
    out += "persona: " + persona_line + "\n";
    if (persona_free) out += "note: persona disabled; attribution is to the learned pseudo-entity\n";
    if (cold_start) out += "note: cold-start user; UNK-persona fallback\n";
    char buf[64];
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto& cand = candidates[c];
      std::snprintf(buf, sizeof(buf), "%.6f", cand.score);
      out += "\n#" + std::to_string(c + 1) + " " + cand.news_id + " score=" + buf + "  " + cand.title + "\n";
      for (const auto& e : cand.entities) {
        std::snprintf(buf, sizeof(buf), "%.6f", e.weight);
        out += "  " + e.label + " [" + e.entity + "] weight=" + buf + " terms:";
        for (const auto& t : e.terms) {
          std::snprintf(buf, sizeof(buf), "%.3f", t.weight);
          out += " " + t.term + "(" + buf + ")";
        }
        out += "\n";
      }
    }
    return out;
  }
};

// `imp` supplies the user's history and the candidate list; labels are
// ignored.
template <class T>
Explanation explain(const PerCoNet<T>& model, const NewsStore& store, const Vocabulary& vocab,
                    const EntityVocabulary& entities, const Impression& imp, std::size_t top_candidates = 3,
                    std::size_t top_terms = 3) {
  const Config& cfg = model.config();
  Graph<T> g(model.params());
  const Persona persona = build_persona(imp.user, imp.history, store, cfg.persona_options());
  const EntityInput<T> input = model.entity_input(g, persona);
  Var<T> u = user_vector(model, g, store, imp, input);

  Explanation ex;
  ex.user = imp.user;
  ex.persona_line = persona_report_line(persona, entities);
  ex.cold_start = persona.cold() || imp.history.empty();
  ex.persona_free = !cfg.use_persona;

  // Row i of the entity input is persona entry i (real entries are a prefix).
  auto row_entity = [&](std::size_t row) -> std::pair<std::string, std::string> {
    if (!cfg.use_persona) return {"[PSEUDO]", "pseudo-entity"};
    if (persona.cold()) return {"[UNK]", "[UNK]"};
    const std::size_t id = persona.entity_ids[row];
    return {entities.token(id), entities.label(id)};
  };

  for (const auto& c : imp.candidates) {
    const NewsItem& item = store[c.news];
    const TokenSequence& text = item.input(cfg.abstract_as_title);
    const NewsRepresentation<T> rep = model.encode_news(g, text, input);
    CandidateExplanation ce{item.id, item.title,
                            static_cast<double>(click_probability(model, g, u, rep.r).item()), {}};
    const auto& beta = rep.entity_attention.value();
    const auto& alpha = rep.term_attention.value();
    for (std::size_t i = 0; i < beta.cols(); ++i) {
      auto [id, label] = row_entity(i);
      EntityAttribution ea{id, label, static_cast<double>(beta(0, i)), {}};
      std::vector<std::size_t> order;
      for (std::size_t t = 0; t < text.ids.size(); ++t)
        if (text.mask[t]) order.push_back(t);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return alpha(i, a) > alpha(i, b); });
      for (std::size_t k = 0; k < order.size() && k < top_terms; ++k)
        ea.terms.push_back({vocab.token(text.ids[order[k]]), static_cast<double>(alpha(i, order[k]))});
      ce.entities.push_back(std::move(ea));
    }
    std::stable_sort(ce.entities.begin(), ce.entities.end(),
                     [](const EntityAttribution& a, const EntityAttribution& b) { return a.weight > b.weight; });
    ex.candidates.push_back(std::move(ce));
  }
  std::stable_sort(ex.candidates.begin(), ex.candidates.end(),
                   [](const CandidateExplanation& a, const CandidateExplanation& b) { return a.score > b.score; });
  if (ex.candidates.size() > top_candidates) ex.candidates.resize(top_candidates);
  return ex;
}

}  // namespace perconet
