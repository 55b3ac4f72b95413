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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "perconet/core/adam.hpp"
#include "perconet/core/errors.hpp"
#include "perconet/core/graph.hpp"
#include "perconet/data/mind.hpp"
#include "perconet/eval/evaluate.hpp"
#include "perconet/model/config.hpp"
#include "perconet/model/objectives.hpp"
#include "perconet/model/perconet.hpp"
#include "perconet/model/scoring.hpp"

namespace perconet {

struct StepLosses {
  double rec = 0.0;
  double cl = 0.0;  // 0 when the contrastive term is off or inapplicable
  double joint = 0.0;
  bool cl_applied = false;
  std::size_t tape_bytes = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double rec_loss = 0.0;
  double cl_loss = 0.0;
  double joint_loss = 0.0;
  std::size_t steps = 0;
  std::size_t peak_tape_bytes = 0;
  std::optional<MetricReport> dev;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"epoch", epoch},     {"rec_loss", rec_loss}, {"cl_loss", cl_loss},
                        {"joint_loss", joint_loss}, {"steps", steps}};
    if (dev) {
      j["dev_auc"] = dev->auc;
      j["dev_mrr"] = dev->mrr;
      for (const auto& [k, v] : dev->ndcg) j["dev_ndcg@" + std::to_string(k)] = v;
    }
    return j;
  }
};

// Joint optimisation of the ranking loss and the weighted contrastive loss.
// Independent random streams drive negative sampling, encoder dropout,
// contrastive title dropout and contrastive encoder dropout, so turning the
// contrastive term on or off never perturbs the other streams.
class Trainer {
 public:
  Trainer(Config config, const NewsStore& store, std::vector<Impression> train, std::vector<Impression> dev,
          std::size_t vocab_size, std::size_t entity_count,
          std::optional<EmbeddingBackend> token_backend = std::nullopt,
          std::optional<EmbeddingBackend> entity_backend = std::nullopt)
      : config_(std::move(config)),
        store_(&store),
        train_(std::move(train)),
        dev_(std::move(dev)),
        model_(config_, vocab_size, entity_count, config_.seed, std::move(token_backend),
               std::move(entity_backend)),
        adam_(AdamOptions{config_.lr, config_.adam_beta1, config_.adam_beta2, config_.adam_eps}),
        sample_rng_(stream(1)),
        dropout_rng_(stream(2)),
        cl_rng_(stream(3)),
        cl_dropout_rng_(stream(4)) {
    personas_.reserve(train_.size());
    for (const auto& imp : train_)
      personas_.push_back(build_persona(imp.user, imp.history, *store_, config_.persona_options()));
  }

  const Config& config() const { return config_; }
  PerCoNet<float>& model() { return model_; }
  const PerCoNet<float>& model() const { return model_; }
  const std::vector<Impression>& train_impressions() const { return train_; }
  const std::vector<Impression>& dev_impressions() const { return dev_; }
  std::size_t epochs_done() const { return epoch_; }

  // One forward/backward/Adam step over a batch of samples.
  StepLosses step(const std::vector<TrainingSample>& batch) {
    if (batch.empty()) throw DegenerateInputError("trainer: empty batch");
    ++step_index_;
    Graph<float> g(model_.params(), true, &dropout_rng_);
    struct UserState {
      EntityInput<float> entities;
      Var<float> u;
    };
    std::unordered_map<std::size_t, UserState> users;
    auto user_for = [&](std::size_t imp_index) -> UserState& {
      auto it = users.find(imp_index);
      if (it != users.end()) return it->second;
      const auto& imp = train_.at(imp_index);
      EntityInput<float> ents = model_.entity_input(g, personas_.at(imp_index));
      const auto inputs = history_inputs(model_, *store_, imp.history);
      Var<float> u = model_.encode_user(g, inputs, Mask(inputs.size(), true), ents).u;
      return users.emplace(imp_index, UserState{ents, u}).first->second;
    };

    std::vector<Var<float>> terms;
    for (const auto& s : batch) {
      UserState& us = user_for(s.impression);
      std::vector<Var<float>> news;
      news.push_back(model_.encode_news(g, store_->at(s.positive).input(config_.abstract_as_title), us.entities).r);
      for (std::size_t n : s.negatives)
        news.push_back(model_.encode_news(g, store_->at(n).input(config_.abstract_as_title), us.entities).r);
      terms.push_back(rec_loss_term(model_, g, us.u, news));
    }
    Var<float> rec = rec_loss(terms);
    StepLosses out;
    out.rec = rec.item();
    if (!std::isfinite(out.rec)) diverged("rec_loss", out.rec);
    Var<float> total = rec;

    if (config_.use_cl) {
      Rng* encoder_rng = g.set_rng(&cl_dropout_rng_);
      std::vector<CrossViews<float>> views;
      std::vector<std::string> seen;
      for (const auto& s : batch) {
        const auto& imp = train_.at(s.impression);
        if (std::find(seen.begin(), seen.end(), imp.user) != seen.end()) continue;
        seen.push_back(imp.user);
        std::vector<const TokenSequence*> titles, abstracts;
        for (std::size_t id : imp.history) {
          titles.push_back(&store_->at(id).title_tokens);
          abstracts.push_back(&store_->at(id).abstract_tokens);
        }
        auto v = cross_view_views(model_, g, titles, abstracts, user_for(s.impression).entities, cl_rng_,
                                  config_.cl_title_dropout);
        if (v) views.push_back(*v);
      }
      g.set_rng(encoder_rng);
      if (views.size() >= 2) {
        Var<float> cl = contrastive_loss(views, static_cast<float>(config_.tau));
        out.cl = cl.item();
        out.cl_applied = true;
        if (!std::isfinite(out.cl)) diverged("cl_loss", out.cl);
        total = joint_loss(rec, cl, static_cast<float>(config_.lambda));
      }
    }
    out.joint = total.item();
    if (!std::isfinite(out.joint)) diverged("joint_loss", out.joint);

    model_.params().zero_grad();
    g.tape().backward(total);
    try {
      adam_step(model_.params(), adam_);
    } catch (const TrainingDivergence& e) {
      throw TrainingDivergence("trainer: step " + std::to_string(step_index_) + ": " + e.what());
    }
    out.tape_bytes = g.tape().bytes();
    return out;
  }

  // Resamples negatives, shuffles, runs every batch, then evaluates on the
  // held-out impressions.
  EpochRecord run_epoch() {
    Warnings warnings;
    auto samples = make_training_samples(train_, config_.negatives, sample_rng_, &warnings);
    if (samples.empty()) throw DegenerateInputError("trainer: no training samples");
    std::shuffle(samples.begin(), samples.end(), sample_rng_);
    EpochRecord rec;
    rec.epoch = ++epoch_;
    std::size_t cl_steps = 0;
    for (std::size_t begin = 0; begin < samples.size(); begin += config_.batch_size) {
      const std::size_t end = std::min(samples.size(), begin + config_.batch_size);
      std::vector<TrainingSample> batch(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                        samples.begin() + static_cast<std::ptrdiff_t>(end));
      const StepLosses l = step(batch);
      rec.rec_loss += l.rec;
      rec.joint_loss += l.joint;
      if (l.cl_applied) {
        rec.cl_loss += l.cl;
        ++cl_steps;
      }
      rec.peak_tape_bytes = std::max(rec.peak_tape_bytes, l.tape_bytes);
      ++rec.steps;
    }
    rec.rec_loss /= static_cast<double>(rec.steps);
    rec.joint_loss /= static_cast<double>(rec.steps);
    if (cl_steps) rec.cl_loss /= static_cast<double>(cl_steps);
    if (!dev_.empty()) rec.dev = evaluate(model_scorer(model_, *store_), dev_, {5, 10}, config_.threads);
    return rec;
  }

  std::vector<EpochRecord> run(const std::function<void(const EpochRecord&)>& on_epoch = nullptr) {
    std::vector<EpochRecord> log;
    for (std::size_t e = 0; e < config_.epochs; ++e) {
      log.push_back(run_epoch());
      if (on_epoch) on_epoch(log.back());
    }
    return log;
  }

 private:
  Rng stream(std::uint64_t id) const {
    std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                      static_cast<std::uint32_t>(id)};
    return Rng(seq);
  }

  [[noreturn]] void diverged(const std::string& component, double value) const {
    throw TrainingDivergence("trainer: step " + std::to_string(step_index_) + ": non-finite " + component +
                             " (" + std::to_string(value) + ")");
  }

  Config config_;
  const NewsStore* store_;
  std::vector<Impression> train_;
  std::vector<Impression> dev_;
  std::vector<Persona> personas_;
  PerCoNet<float> model_;
  AdamState<float> adam_;
  Rng sample_rng_;
  Rng dropout_rng_;
  Rng cl_rng_;
  Rng cl_dropout_rng_;
  std::size_t epoch_ = 0;
  std::size_t step_index_ = 0;
};

}  // namespace perconet
