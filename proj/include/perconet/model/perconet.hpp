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
#include <optional>
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/graph.hpp"
#include "perconet/core/layers.hpp"
#include "perconet/core/ops.hpp"
#include "perconet/core/params.hpp"
#include "perconet/model/config.hpp"
#include "perconet/persona/persona.hpp"
#include "perconet/text/text_encoder.hpp"

namespace perconet {

// Entity rows fed to both encoders together with their validity mask.
template <class T>
struct EntityInput {
  Var<T> embeddings;  // [m x d_e]
  Mask mask;          // [m]
  // Persona-side projections, shared by every news item encoded against
  // this input on the same graph.
  mutable std::optional<Var<T>> news_keys;  // [m x d_r]
  mutable std::optional<Var<T>> user_keys;  // [m x d_att]
};

template <class T>
struct NewsRepresentation {
  Var<T> r;                 // [1 x d_r]
  Var<T> entity_attention;  // [1 x m], weight of each entity summary
  Var<T> term_attention;    // [m x n_w], per-entity weights over terms
};

template <class T>
struct UserRepresentation {
  Var<T> u;                 // [1 x d_r]
  Var<T> entity_attention;  // [1 x m]
  Var<T> news_attention;    // [m x n_u'], n_u' = unmasked history items
};

// Parameter handles of the whole architecture. Indices are stable across
// precision casts of the store.
struct Layout {
  ParamId tokens;
  std::optional<ParamId> entities;       // full persona path
  std::optional<ParamId> pseudo_entity;  // persona-free variants

  // news encoder
  Dense news_in;   // BERT-side dense layer, before the LeakyReLU
  Dense news_out;
  MultiHeadSelfAttention news_attention;
  Dense news_entity;
  ParamId news_bilinear;
  AdditiveAttention news_pool;

  // user encoder
  MultiHeadSelfAttention user_attention;
  Dense user_entity;
  Dense user_pair;  // scores entity/news pairs, weight [d_att x 2 d_r]
  ParamId user_pair_query;
  AdditiveAttention user_pool;

  // click head
  Dense click_hidden;
  ParamId click_query;

  // contrastive projection head, present only when use_cl
  std::optional<Dense> proj_hidden;
  std::optional<Dense> proj_out;
};

template <class T>
class PerCoNet {
 public:
  // Builds a freshly initialised model. Optional backends replace the
  // trainable token/entity tables (e.g. with imported frozen vectors).
  PerCoNet(const Config& config, std::size_t vocab_size, std::size_t entity_count, std::uint64_t seed,
           std::optional<EmbeddingBackend> token_backend = std::nullopt,
           std::optional<EmbeddingBackend> entity_backend = std::nullopt)
      : config_(config) {
    validate(config_);
    Rng rng(seed);
    const std::size_t dr = config_.d_r;
    EmbeddingBackend tokens = token_backend ? std::move(*token_backend)
                                            : trainable_table(vocab_size, config_.d_w, rng);
    if (tokens.dim() != config_.d_w || tokens.rows() != vocab_size) {
      throw DimensionError("model: token table " + shape_string(tokens.table.shape) +
                           " does not match vocabulary/d_w");
    }
    layout_.tokens = store_.add("embed.tokens", tokens.table.template cast<T>(), tokens.trainable);
    if (config_.use_persona) {
      EmbeddingBackend ents = entity_backend ? std::move(*entity_backend)
                                             : trainable_table(entity_count, config_.d_e, rng);
      if (ents.dim() != config_.d_e || ents.rows() != entity_count) {
        throw DimensionError("model: entity table " + shape_string(ents.table.shape) +
                             " does not match entity vocabulary/d_e");
      }
      layout_.entities = store_.add("embed.entities", ents.table.template cast<T>(), ents.trainable);
    } else {
      layout_.pseudo_entity = store_.add("embed.pseudo_entity", init::uniform<T>({1, config_.d_e}, 0.1, rng));
    }

    layout_.news_in = Dense::create(store_, "news.dense_in", config_.d_w, dr, rng);
    layout_.news_out = Dense::create(store_, "news.dense_out", dr, dr, rng);
    layout_.news_attention = MultiHeadSelfAttention::create(store_, "news.mha", dr, config_.heads, rng);
    layout_.news_entity = Dense::create(store_, "news.entity_proj", config_.d_e, dr, rng);
    layout_.news_bilinear = store_.add("news.bilinear", init::glorot<T>(dr, dr, rng));
    layout_.news_pool = AdditiveAttention::create(store_, "news.pool", dr, config_.d_att, rng);

    layout_.user_attention = MultiHeadSelfAttention::create(store_, "user.mha", dr, config_.heads, rng);
    layout_.user_entity = Dense::create(store_, "user.entity_proj", config_.d_e, dr, rng);
    layout_.user_pair = Dense::create(store_, "user.pair", 2 * dr, config_.d_att, rng);
    layout_.user_pair_query = store_.add("user.pair.query", init::glorot<T>(1, config_.d_att, rng));
    layout_.user_pool = AdditiveAttention::create(store_, "user.pool", dr, config_.d_att, rng);

    layout_.click_hidden = Dense::create(store_, "click.hidden", 2 * dr, config_.d_att, rng);
    layout_.click_query = store_.add("click.query", init::glorot<T>(1, config_.d_att, rng));

    if (config_.use_cl) {
      layout_.proj_hidden = Dense::create(store_, "cl.hidden", dr, dr, rng);
      layout_.proj_out = Dense::create(store_, "cl.out", dr, config_.d_p, rng);
    }
  }

  const Config& config() const { return config_; }
  const Layout& layout() const { return layout_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }

  template <class U>
  PerCoNet<U> cast() const {
    return PerCoNet<U>(config_, layout_, store_.template cast<U>());
  }

  // Entity rows for a persona. Real entries are compacted into a prefix; a
  // cold-start persona becomes the learned UNK entity row, and persona-free
  // variants always use the single learned pseudo-entity.
  EntityInput<T> entity_input(Graph<T>& g, const Persona& persona) const {
    if (!config_.use_persona) return {g.param(*layout_.pseudo_entity), Mask{true}};
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < persona.entity_ids.size(); ++i)
      if (persona.mask[i]) ids.push_back(persona.entity_ids[i]);
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    const Mask all(ids.size(), true);
    return {gather_rows(g.param(*layout_.entities), ids, all), all};
  }

  NewsRepresentation<T> encode_news(Graph<T>& g, const TokenSequence& text,
                                    const EntityInput<T>& entities) const {
    if (text.empty()) throw DegenerateInputError("news encoder: text has no unmasked tokens");
    const T slope = static_cast<T>(config_.leaky_slope);
    Var<T> words = drop(g, encode_tokens(g, layout_.tokens, text));
    Var<T> hidden = layout_.news_out(g, leaky_relu(layout_.news_in(g, words), slope));
    Var<T> terms = drop(g, layout_.news_attention(g, hidden, text.mask));
    if (!entities.news_keys) {
      Var<T> ents = leaky_relu(layout_.news_entity(g, entities.embeddings), slope);
      entities.news_keys = matmul(ents, g.param(layout_.news_bilinear));
    }
    Var<T> logits = matmul(*entities.news_keys, transpose(terms));
    Var<T> term_weights = softmax_masked(logits, text.mask);
    Var<T> summaries = matmul(term_weights, terms);
    Pooled<T> pooled = layout_.news_pool(g, summaries, entities.mask);
    return {pooled.vector, pooled.weights, term_weights};
  }

  // Encodes each unmasked history item with the same persona, contextualises
  // the news vectors, lets every entity attend over them and pools.
  UserRepresentation<T> encode_user(Graph<T>& g, const std::vector<const TokenSequence*>& history,
                                    const Mask& history_mask, const EntityInput<T>& entities) const {
    if (history.size() != history_mask.size()) {
      throw DimensionError("user encoder: history and mask lengths differ");
    }
    std::vector<Var<T>> news;
    for (std::size_t j = 0; j < history.size(); ++j)
      if (history_mask[j]) news.push_back(encode_news(g, *history[j], entities).r);
    if (news.empty()) throw ColdStartError("user encoder: no unmasked history items");

    const T slope = static_cast<T>(config_.leaky_slope);
    const std::size_t dr = config_.d_r;
    const std::size_t m = entities.embeddings.rows();
    const std::size_t n = news.size();
    const Mask all(n, true);
    Var<T> stacked = drop(g, news.size() == 1 ? news.front() : concat_rows(news));
    Var<T> z = layout_.user_attention(g, stacked, all);
    // V (e_i (+) z_j) split into its entity and news column blocks.
    Var<T> pair_weight = g.param(layout_.user_pair.weight);
    if (!entities.user_keys) {
      Var<T> ents = leaky_relu(layout_.user_entity(g, entities.embeddings), slope);
      entities.user_keys = matmul(ents, transpose(slice_cols(pair_weight, 0, dr)));
    }
    Var<T> entity_part = *entities.user_keys;
    Var<T> news_part = linear(z, slice_cols(pair_weight, dr, dr), g.param(layout_.user_pair.bias));
    Var<T> pair_hidden = leaky_relu(pairwise_add(entity_part, news_part), slope);
    Var<T> logits = reshape(matmul(pair_hidden, transpose(g.param(layout_.user_pair_query))), Shape{m, n});
    Var<T> news_weights = softmax_masked(logits, all);
    Var<T> summaries = matmul(news_weights, z);
    Pooled<T> pooled = layout_.user_pool(g, summaries, entities.mask);
    return {pooled.vector, pooled.weights, news_weights};
  }

  // Pre-sigmoid click score [1 x 1].
  Var<T> click_logit(Graph<T>& g, Var<T> user, Var<T> news) const {
    Var<T> joined = concat_cols(std::vector<Var<T>>{user, news});
    Var<T> hidden = leaky_relu(layout_.click_hidden(g, joined), static_cast<T>(config_.leaky_slope));
    return matmul(hidden, transpose(g.param(layout_.click_query)));
  }

  // Shared two-layer projection used by the contrastive objective.
  Var<T> project(Graph<T>& g, Var<T> user) const {
    if (!layout_.proj_hidden) throw ConfigError("model: contrastive head disabled (use_cl = false)");
    const T slope = static_cast<T>(config_.leaky_slope);
    return leaky_relu((*layout_.proj_out)(g, leaky_relu((*layout_.proj_hidden)(g, user), slope)), slope);
  }

 private:
  template <class U>
  friend class PerCoNet;

  PerCoNet(Config config, Layout layout, ParamStore<T> store)
      : config_(std::move(config)), layout_(std::move(layout)), store_(std::move(store)) {}

  Var<T> drop(Graph<T>& g, Var<T> x) const {
    if (!g.training() || config_.dropout == 0.0) return x;
    return dropout(x, static_cast<T>(config_.dropout), true, g.rng());
  }

  Config config_;
  Layout layout_;
  ParamStore<T> store_;
};

}  // namespace perconet
