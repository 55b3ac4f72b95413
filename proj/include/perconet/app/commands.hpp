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

#include <openssl/evp.h>

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "perconet/app/gradcheck_suite.hpp"
#include "perconet/core/checkpoint.hpp"
#include "perconet/core/errors.hpp"
#include "perconet/data/mind.hpp"
#include "perconet/data/synthetic.hpp"
#include "perconet/eval/evaluate.hpp"
#include "perconet/model/config.hpp"
#include "perconet/model/explain.hpp"
#include "perconet/model/scoring.hpp"
#include "perconet/persona/persona.hpp"
#include "perconet/text/text_encoder.hpp"
#include "perconet/train/trainer.hpp"

namespace perconet::app {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kCheckFailed = 4 };

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const VocabularyError*>(&e) || dynamic_cast<const DegenerateInputError*>(&e))
    return kDataError;
  return kFailure;
}

// ---------------------------------------------------------------------------
// Digests and manifests.

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError(path.string(), 0, "cannot open");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline std::string sha256_file(const fs::path& path) { return sha256_hex(read_bytes(path)); }

inline void write_text(const fs::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << body;
}

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::pair<std::string, fs::path>> inputs;     // role -> dataset file
  std::vector<std::pair<std::string, fs::path>> artifacts;  // role -> file inside the run dir

  nlohmann::json to_json(const fs::path& dir) const {
    nlohmann::json j;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = nlohmann::json::object();
    for (const auto& [role, path] : inputs)
      j["inputs"][role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
    j["artifacts"] = nlohmann::json::object();
    for (const auto& [role, name] : artifacts)
      j["artifacts"][role] = {{"path", name.string()}, {"sha256", sha256_file(dir / name)}};
    return j;
  }

  void write(const fs::path& dir) const { write_text(dir / "manifest.json", to_json(dir).dump(2) + "\n"); }
};

inline nlohmann::json config_json(const Config& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, field] : detail::config_fields()) j[key] = field.write(c);
  return j;
}

// ---------------------------------------------------------------------------
// Shared argument plumbing.

// Flag value, then the environment variable, else an error naming both.
inline std::string data_path(const std::string& flag_value, const char* env, const std::string& flag) {
  std::string path = flag_value;
  if (path.empty()) {
    if (const char* v = std::getenv(env)) path = v;
  }
  if (path.empty()) throw ConfigError("missing " + flag + " (or " + env + ")");
  if (!fs::exists(path)) throw ParseError(path, 0, "no such file");
  return path;
}

struct ConfigArgs {
  std::string config_path;
  std::string variant;
  std::vector<std::string> sets;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

// defaults < config file < variant < --set < dedicated flags
inline Config resolve_config(const ConfigArgs& a) {
  Config c;
  if (!a.config_path.empty()) c = load_config(a.config_path, c);
  if (!a.variant.empty()) apply_variant(c, a.variant);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  if (a.seed) c.seed = *a.seed;
  if (a.epochs) c.epochs = *a.epochs;
  validate(c);
  return c;
}

struct Corpus {
  Vocabulary vocab;
  EntityVocabulary entities;
  NewsStore news;
  std::vector<Impression> impressions;
  Warnings warnings;
};

inline Corpus load_corpus(const std::string& news, const std::string& behaviors, const Config& c,
                          Vocabulary vocab = {}, EntityVocabulary entities = {}) {
  Corpus out;
  out.vocab = std::move(vocab);
  out.entities = std::move(entities);
  NewsParseOptions po;
  po.n_w = c.n_w;
  po.title_entities_only = c.title_entities_only;
  out.news = parse_news_file(news, out.vocab, out.entities, po, &out.warnings);
  out.impressions = parse_behaviors_file(behaviors, out.news, c.n_u, &out.warnings);
  return out;
}

inline void print_warnings(const Warnings& w, std::ostream& err) {
  constexpr std::size_t kShown = 10;
  for (std::size_t i = 0; i < w.size() && i < kShown; ++i) err << "warning: " << w[i] << "\n";
  if (w.size() > kShown) err << "warning: " << (w.size() - kShown) << " more\n";
}

// Persona of each user as of their newest impression.
inline std::string persona_report(const std::vector<Impression>& imps, const NewsStore& store,
                                  const EntityVocabulary& entities, const Config& c) {
  std::map<std::string, const Impression*> latest;
  for (const auto& imp : imps) latest[imp.user] = &imp;
  std::string out;
  for (const auto& [user, imp] : latest)
    out += persona_report_line(build_persona(user, imp->history, store, c.persona_options()), entities) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ConfigArgs config;
  std::string news, behaviors, out = "run";
  std::string word_vectors, entity_vectors;
};

struct TrainResult {
  Config config;
  std::vector<EpochRecord> log;
  std::optional<MetricReport> dev;  // last epoch
};

inline TrainResult cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const Config c = resolve_config(a.config);
  const std::string news = data_path(a.news, "PERCONET_NEWS", "--news");
  const std::string behaviors = data_path(a.behaviors, "PERCONET_BEHAVIORS", "--behaviors");
  Corpus data = load_corpus(news, behaviors, c);
  print_warnings(data.warnings, err);
  auto [train, dev] = split_by_time(data.impressions, c.dev_fraction);
  data.vocab.freeze();
  data.entities.freeze();

  std::optional<EmbeddingBackend> words, ents;
  if (!a.word_vectors.empty()) words = import_frozen_vectors(a.word_vectors, data.vocab, c.d_w);
  if (!a.entity_vectors.empty()) ents = import_frozen_vectors(a.entity_vectors, data.entities, c.d_e);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_text(dir / "config.toml", config_to_text(c));
  data.vocab.save((dir / "vocab.txt").string());
  data.entities.save((dir / "entities.tsv").string());
  write_text(dir / "personas.txt", persona_report(train, data.news, data.entities, c));

  out << "train: " << train.size() << " impressions, dev: " << dev.size() << ", vocab " << data.vocab.size()
      << ", entities " << data.entities.size() << "\n";
  Trainer trainer(c, data.news, std::move(train), std::move(dev), data.vocab.size(), data.entities.size(),
                  std::move(words), std::move(ents));
  std::ofstream log(dir / "log.jsonl", std::ios::binary);
  TrainResult result{c, {}, std::nullopt};
  result.log = trainer.run([&](const EpochRecord& r) {
    log << r.to_json().dump() << "\n";
    log.flush();
    out << "epoch " << r.epoch << "  rec " << r.rec_loss << "  cl " << r.cl_loss << "  joint " << r.joint_loss;
    if (r.dev) out << "  dev auc " << r.dev->auc;
    out << "\n";
  });
  log.close();
  save_checkpoint(trainer.model().params(), (dir / "checkpoint.bin").string());

  RunManifest m{"train", c.seed, config_json(c), {{"news", news}, {"behaviors", behaviors}}, {}};
  if (!a.word_vectors.empty()) m.inputs.emplace_back("word_vectors", a.word_vectors);
  if (!a.entity_vectors.empty()) m.inputs.emplace_back("entity_vectors", a.entity_vectors);
  m.artifacts = {{"config", "config.toml"},   {"checkpoint", "checkpoint.bin"}, {"log", "log.jsonl"},
                 {"vocabulary", "vocab.txt"}, {"entities", "entities.tsv"},     {"personas", "personas.txt"}};
  if (!result.log.empty() && result.log.back().dev) {
    result.dev = result.log.back().dev;
    write_text(dir / "metrics.txt", result.dev->to_text());
    write_text(dir / "metrics.json", result.dev->to_json().dump(2) + "\n");
    m.artifacts.emplace_back("metrics", "metrics.txt");
    m.artifacts.emplace_back("metrics_json", "metrics.json");
  }
  m.write(dir);
  return result;
}

// ---------------------------------------------------------------------------
// Loading a finished run.

struct LoadedRun {
  Config config;
  std::unique_ptr<PerCoNet<float>> model;
  Corpus data;  // vocabularies frozen at training time
};

// `config_path` replaces the run's own config.toml; it must describe the
// same architecture as the checkpoint.
inline LoadedRun load_run(const fs::path& run, const std::string& news, const std::string& behaviors,
                          const std::string& config_path = {}, std::optional<std::uint64_t> seed = std::nullopt) {
  LoadedRun r;
  r.config = load_config(config_path.empty() ? (run / "config.toml").string() : config_path);
  if (seed) r.config.seed = *seed;
  Vocabulary vocab = Vocabulary::load((run / "vocab.txt").string());
  EntityVocabulary entities = EntityVocabulary::load((run / "entities.tsv").string());
  vocab.freeze();
  entities.freeze();
  r.data = load_corpus(news, behaviors, r.config, std::move(vocab), std::move(entities));
  r.model = std::make_unique<PerCoNet<float>>(r.config, r.data.vocab.size(), r.data.entities.size(), r.config.seed);
  load_checkpoint(r.model->params(), (run / "checkpoint.bin").string());
  return r;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string run, news, behaviors, out;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
};

inline MetricReport cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const std::string news = data_path(a.news, "PERCONET_NEWS", "--news");
  const std::string behaviors = data_path(a.behaviors, "PERCONET_BEHAVIORS", "--behaviors");
  const fs::path run = a.run;
  if (!fs::exists(run / "checkpoint.bin")) throw ParseError((run / "checkpoint.bin").string(), 0, "no such file");
  LoadedRun r = load_run(run, news, behaviors, a.config_path, a.seed);
  print_warnings(r.data.warnings, err);
  const std::size_t threads = a.threads ? a.threads : r.config.threads;
  const MetricReport report =
      evaluate(model_scorer(*r.model, r.data.news), r.data.impressions, {5, 10}, threads);

  const fs::path dir = a.out.empty() ? run / "eval" : fs::path(a.out);
  fs::create_directories(dir);
  write_text(dir / "metrics.txt", report.to_text());
  write_text(dir / "metrics.json", report.to_json().dump(2) + "\n");
  RunManifest m{"eval", r.config.seed, config_json(r.config),
                {{"news", news}, {"behaviors", behaviors}, {"checkpoint", run / "checkpoint.bin"}},
                {{"metrics", "metrics.txt"}, {"metrics_json", "metrics.json"}}};
  m.write(dir);
  out << report.to_text();
  return report;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  TrainArgs train;
  std::vector<std::string> lambda, top_k, top_g;
};

struct SweepRow {
  std::string value;
  MetricReport report;
};

inline std::vector<SweepRow> cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  std::string key;
  const std::vector<std::string>* values = nullptr;
  std::size_t axes = 0;
  for (const auto& [name, list] : {std::pair<const char*, const std::vector<std::string>*>{"lambda", &a.lambda},
                                   {"top_k", &a.top_k},
                                   {"top_g", &a.top_g}}) {
    if (list->empty()) continue;
    ++axes;
    key = name;
    values = list;
  }
  if (axes != 1) throw ConfigError("sweep needs values for exactly one of --lambda, --top-k, --top-g");

  const fs::path dir = a.train.out;
  fs::create_directories(dir);
  std::vector<SweepRow> rows;
  std::ostringstream discard;
  for (const auto& v : *values) {
    TrainArgs run = a.train;
    run.config.sets.push_back(key + "=" + v);
    run.out = (dir / (key + "_" + v)).string();
    out << "sweep " << key << " = " << v << "\n";
    const TrainResult r = cmd_train(run, discard, err);
    if (!r.dev) throw ConfigError("sweep needs a held-out split (dev_fraction > 0)");
    rows.push_back({v, *r.dev});
  }

  std::string csv = "param_value,auc,mrr,ndcg\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %8s %8s %8s\n", key.c_str(), "auc", "mrr", "ndcg@10");
  std::string table = buf;
  for (const auto& row : rows) {
    const double ndcg = row.report.ndcg.count(10) ? row.report.ndcg.at(10) : 0.0;
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", row.value.c_str(), row.report.auc, row.report.mrr, ndcg);
    csv += buf;
    std::snprintf(buf, sizeof(buf), "%-12s %8.4f %8.4f %8.4f\n", row.value.c_str(), row.report.auc,
                  row.report.mrr, ndcg);
    table += buf;
  }
  write_text(dir / "sweep.csv", csv);
  write_text(dir / "sweep.txt", table);
  out << table;

  const Config base = resolve_config(a.train.config);
  RunManifest m{"sweep", base.seed, config_json(base), {}, {{"data", "sweep.csv"}, {"table", "sweep.txt"}}};
  m.config["sweep_axis"] = key;
  m.config["sweep_values"] = *values;
  for (const auto& v : *values) m.artifacts.emplace_back("run_" + v, fs::path(key + "_" + v) / "manifest.json");
  m.write(dir);
  return rows;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainArgs {
  std::string run, news, behaviors, out;
  std::string user;
  std::vector<std::string> candidates;  // news ids; default: the user's newest impression
  std::size_t top_candidates = 3, top_terms = 3;
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

inline Explanation cmd_explain(const ExplainArgs& a, std::ostream& out, std::ostream& err) {
  const std::string news = data_path(a.news, "PERCONET_NEWS", "--news");
  const std::string behaviors = data_path(a.behaviors, "PERCONET_BEHAVIORS", "--behaviors");
  const fs::path run = a.run;
  LoadedRun r = load_run(run, news, behaviors, a.config_path, a.seed);
  print_warnings(r.data.warnings, err);

  const Impression* latest = nullptr;
  for (const auto& imp : r.data.impressions)
    if (imp.user == a.user) latest = &imp;
  if (!latest) throw ParseError(behaviors, 0, "unknown user " + a.user);
  Impression imp = *latest;
  if (!a.candidates.empty()) {
    imp.candidates.clear();
    for (const auto& id : a.candidates) {
      auto idx = r.data.news.find(id);
      if (!idx) throw ParseError(news, 0, "unknown candidate news " + id);
      imp.candidates.push_back({*idx, 0});
    }
  }
  const Explanation ex =
      explain(*r.model, r.data.news, r.data.vocab, r.data.entities, imp, a.top_candidates, a.top_terms);
  out << ex.to_text();
  if (!a.out.empty()) {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    write_text(dir / "explain.txt", ex.to_text());
    RunManifest m{"explain", r.config.seed, config_json(r.config),
                  {{"news", news}, {"behaviors", behaviors}, {"checkpoint", run / "checkpoint.bin"}},
                  {{"report", "explain.txt"}}};
    m.config["user"] = a.user;
    m.write(dir);
  }
  return ex;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  double tol = 1e-4;
  std::uint64_t seed = 7;
  std::string out;
};

// Returns true when every check passed.
inline bool cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto reports = run_gradient_suite(a.tol, a.seed);
  std::string text;
  std::size_t failed = 0;
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s %-48s max_rel_err %.3e  (%zu components)\n", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.max_rel_error, r.checked);
    text += buf;
    if (!r.passed) ++failed;
  }
  std::snprintf(buf, sizeof(buf), "%zu checks, %zu failed, tol %g\n", reports.size(), failed, a.tol);
  text += buf;
  out << text;
  if (!a.out.empty()) {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    write_text(dir / "gradcheck.txt", text);
    RunManifest m{"gradcheck", a.seed, {{"tol", a.tol}}, {}, {{"report", "gradcheck.txt"}}};
    m.write(dir);
  }
  return failed == 0;
}

// ---------------------------------------------------------------------------
// synth

// Keyed text ("key = value", '#' comments) over the generator options.
inline void set_synth_value(SyntheticOptions& o, const std::string& key, const std::string& value) {
  static const std::map<std::string, std::size_t SyntheticOptions::*> sizes = {
      {"users", &SyntheticOptions::users},
      {"news", &SyntheticOptions::news},
      {"entities", &SyntheticOptions::entities},
      {"interests_per_user", &SyntheticOptions::interests_per_user},
      {"history_length", &SyntheticOptions::history_length},
      {"impressions_per_user", &SyntheticOptions::impressions_per_user},
      {"candidates", &SyntheticOptions::candidates},
      {"matching_candidates", &SyntheticOptions::matching_candidates},
      {"title_length", &SyntheticOptions::title_length},
      {"abstract_length", &SyntheticOptions::abstract_length},
      {"surface_forms", &SyntheticOptions::surface_forms},
      {"max_entities_per_news", &SyntheticOptions::max_entities_per_news}};
  static const std::map<std::string, double SyntheticOptions::*> reals = {
      {"entity_count_decay", &SyntheticOptions::entity_count_decay},
      {"click_if_match", &SyntheticOptions::click_if_match},
      {"click_otherwise", &SyntheticOptions::click_otherwise}};
  try {
    if (key == "seed") {
      o.seed = std::stoull(value);
    } else if (auto it = sizes.find(key); it != sizes.end()) {
      o.*(it->second) = std::stoull(value);
    } else if (auto jt = reals.find(key); jt != reals.end()) {
      o.*(jt->second) = std::stod(value);
    } else {
      std::string valid = "seed";
      for (const auto& [k, _] : sizes) valid += ", " + k;
      for (const auto& [k, _] : reals) valid += ", " + k;
      throw ConfigError("unknown synth key '" + key + "'; valid keys: " + valid);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
}

inline SyntheticOptions load_synth_options(const std::string& path, SyntheticOptions o = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    set_synth_value(o, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return o;
}

struct SynthArgs {
  std::string config_path;
  std::string out = "synth";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> users, news, entities;
};

inline SyntheticOptions resolve_synth(const SynthArgs& a) {
  SyntheticOptions o;
  if (!a.config_path.empty()) o = load_synth_options(a.config_path, o);
  if (a.seed) o.seed = *a.seed;
  if (a.users) o.users = *a.users;
  if (a.news) o.news = *a.news;
  if (a.entities) o.entities = *a.entities;
  return o;
}

inline void cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SyntheticOptions o = resolve_synth(a);
  const fs::path dir = a.out;
  write_synthetic(generate_synthetic(o), dir);
  RunManifest m{"synth", o.seed,
                {{"users", o.users}, {"news", o.news}, {"entities", o.entities}, {"seed", o.seed}},
                {},
                {{"news", "news.tsv"}, {"behaviors", "behaviors.tsv"}, {"truth", "truth.tsv"}}};
  m.write(dir);
  out << "wrote " << (dir / "news.tsv").string() << ", " << (dir / "behaviors.tsv").string() << ", "
      << (dir / "truth.tsv").string() << "\n";
}

}  // namespace perconet::app
