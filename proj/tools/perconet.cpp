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

// perconet: train, eval, sweep, explain, gradcheck, synth.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "perconet/app/commands.hpp"

namespace {

using namespace perconet::app;

template <class T>
void optional_flag(CLI::App* cmd, const std::string& name, std::optional<T>& target, const std::string& help) {
  cmd->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void common_model_flags(CLI::App* cmd, ConfigArgs& c) {
  cmd->add_option("--config", c.config_path, "keyed config file (key = value)");
  optional_flag(cmd, "--seed", c.seed, "master seed");
  optional_flag(cmd, "--epochs", c.epochs, "training epochs");
  cmd->add_option("--variant", c.variant, "full, no-persona, no-cl, no-both, no-cl+abstract, no-both+abstract");
  cmd->add_option("--set", c.sets, "override one config key, key=value (repeatable)");
}

void data_flags(CLI::App* cmd, std::string& news, std::string& behaviors) {
  cmd->add_option("--news", news, "news.tsv (default $PERCONET_NEWS)");
  cmd->add_option("--behaviors", behaviors, "behaviors.tsv (default $PERCONET_BEHAVIORS)");
}

void train_flags(CLI::App* cmd, TrainArgs& t) {
  common_model_flags(cmd, t.config);
  data_flags(cmd, t.news, t.behaviors);
  cmd->add_option("--out", t.out, "run directory")->capture_default_str();
  cmd->add_option("--word-vectors", t.word_vectors, "frozen word vectors (text format)");
  cmd->add_option("--entity-vectors", t.entity_vectors, "frozen entity vectors (text format)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PerCoNet news recommendation"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a run directory");
  train_flags(train_cmd, train);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "score impressions with a trained run");
  eval_cmd->add_option("--run", eval.run, "run directory from train")->required();
  data_flags(eval_cmd, eval.news, eval.behaviors);
  eval_cmd->add_option("--config", eval.config_path, "config replacing the run's config.toml");
  optional_flag(eval_cmd, "--seed", eval.seed, "seed (recorded in the manifest)");
  eval_cmd->add_option("--out", eval.out, "output directory (default <run>/eval)");
  eval_cmd->add_option("--threads", eval.threads, "evaluation workers");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate once per value of one hyperparameter");
  train_flags(sweep_cmd, sweep.train);
  sweep_cmd->add_option("--lambda", sweep.lambda, "contrastive weights, comma separated")->delimiter(',');
  sweep_cmd->add_option("--top-k", sweep.top_k, "entities per item, comma separated")->delimiter(',');
  sweep_cmd->add_option("--top-g", sweep.top_g, "recent items, comma separated")->delimiter(',');

  ExplainArgs explain;
  auto* explain_cmd = app.add_subcommand("explain", "attribute a user's recommendations to persona entities");
  explain_cmd->add_option("--run", explain.run, "run directory from train")->required();
  data_flags(explain_cmd, explain.news, explain.behaviors);
  explain_cmd->add_option("--user", explain.user, "user id")->required();
  explain_cmd->add_option("--candidates", explain.candidates, "candidate news ids (default: newest impression)")
      ->delimiter(',');
  explain_cmd->add_option("--top", explain.top_candidates, "candidates to explain")->capture_default_str();
  explain_cmd->add_option("--terms", explain.top_terms, "title terms per entity")->capture_default_str();
  explain_cmd->add_option("--config", explain.config_path, "config replacing the run's config.toml");
  optional_flag(explain_cmd, "--seed", explain.seed, "seed (recorded in the manifest)");
  explain_cmd->add_option("--out", explain.out, "also write explain.txt and a manifest here");

  GradcheckArgs grad;
  std::string grad_config;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference checks of every gradient");
  grad_cmd->add_option("--tol", grad.tol, "relative error tolerance")->capture_default_str();
  grad_cmd->add_option("--seed", grad.seed, "seed for the check points")->capture_default_str();
  grad_cmd->add_option("--config", grad_config, "accepted for uniformity; shapes are built in");
  grad_cmd->add_option("--out", grad.out, "also write gradcheck.txt and a manifest here");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic MIND-format corpus");
  synth_cmd->add_option("--config", synth.config_path, "keyed generator options");
  optional_flag(synth_cmd, "--seed", synth.seed, "generator seed");
  optional_flag(synth_cmd, "--users", synth.users, "user count");
  optional_flag(synth_cmd, "--news-count", synth.news, "news count");
  optional_flag(synth_cmd, "--entities", synth.entities, "entity count");
  synth_cmd->add_option("--out", synth.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*train_cmd) {
      cmd_train(train, std::cout, std::cerr);
    } else if (*eval_cmd) {
      cmd_eval(eval, std::cout, std::cerr);
    } else if (*sweep_cmd) {
      cmd_sweep(sweep, std::cout, std::cerr);
    } else if (*explain_cmd) {
      cmd_explain(explain, std::cout, std::cerr);
    } else if (*grad_cmd) {
      if (!grad_config.empty()) perconet::load_config(grad_config);
      if (!cmd_gradcheck(grad, std::cout)) return kCheckFailed;
    } else if (*synth_cmd) {
      cmd_synth(synth, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}
