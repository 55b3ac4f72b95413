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
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "perconet/core/errors.hpp"
#include "perconet/core/graph.hpp"
#include "perconet/text/vocabulary.hpp"

// MIND-format news.tsv / behaviors.tsv ingestion.
//
// news.tsv:      id \t category \t subcategory \t title \t abstract \t url
//                \t title entities (JSON) \t abstract entities (JSON)
// behaviors.tsv: impression id \t user id \t time \t history ids
//                \t "newsid-label" candidates

namespace perconet {

struct EntityMention {
  std::string wikidata_id;
  std::string label;
  bool operator==(const EntityMention&) const = default;
};

struct NewsItem {
  std::string id;
  std::string category;
  std::string subcategory;
  std::string title;
  std::string abstract;
  std::string url;
  std::vector<EntityMention> title_entities;
  std::vector<EntityMention> abstract_entities;

  TokenSequence title_tokens;
  TokenSequence abstract_tokens;
  TokenSequence combined_tokens;  // title then abstract, truncated to n_w
  std::vector<std::size_t> entity_ids;  // persona source, in listed order

  const TokenSequence& input(bool abstract_as_title) const {
    return abstract_as_title ? combined_tokens : title_tokens;
  }
};

class NewsStore {
 public:
  std::size_t add(NewsItem item) {
    auto [it, inserted] = index_.emplace(item.id, items_.size());
    if (!inserted) return it->second;
    items_.push_back(std::move(item));
    return items_.size() - 1;
  }
  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const NewsItem& at(std::size_t i) const { return items_.at(i); }
  const NewsItem& operator[](std::size_t i) const { return items_[i]; }
  std::size_t size() const { return items_.size(); }
  const std::vector<NewsItem>& items() const { return items_; }

 private:
  std::vector<NewsItem> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Candidate {
  std::size_t news = 0;
  int label = 0;
  bool operator==(const Candidate&) const = default;
};

struct Impression {
  std::string id;
  std::string user;
  std::string time;
  std::int64_t timestamp = 0;       // seconds, comparable across records
  std::vector<std::size_t> history; // oldest -> newest, newest n_u kept
  std::vector<Candidate> candidates;
};

struct NewsParseOptions {
  std::size_t n_w = 20;
  bool title_entities_only = false;
};

using Warnings = std::vector<std::string>;

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline void warn(Warnings* sink, std::string msg) {
  if (sink) sink->push_back(std::move(msg));
}

inline std::vector<EntityMention> parse_entities(const std::string& field, const std::string& where,
                                                 Warnings* warnings) {
  std::vector<EntityMention> out;
  if (field.empty()) return out;
  try {
    const auto json = nlohmann::json::parse(field);
    if (!json.is_array()) throw std::runtime_error("not an array");
    for (const auto& e : json) {
      if (!e.is_object() || !e.contains("WikidataId") || !e["WikidataId"].is_string()) {
        throw std::runtime_error("entry without a string WikidataId");
      }
      EntityMention m{e["WikidataId"].get<std::string>(), ""};
      if (e.contains("Label") && e["Label"].is_string()) m.label = e["Label"].get<std::string>();
      out.push_back(std::move(m));
    }
  } catch (const std::exception& ex) {
    warn(warnings, where + ": malformed entity list ignored (" + ex.what() + ")");
    out.clear();
  }
  return out;
}

inline std::string entities_json(const std::vector<EntityMention>& mentions) {
  auto arr = nlohmann::json::array();
  for (const auto& m : mentions) arr.push_back({{"Label", m.label}, {"WikidataId", m.wikidata_id}});
  return arr.dump();
}

// Days since 1970-01-01 for a proleptic Gregorian date.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

// "M/D/YYYY h:mm:ss AM" as used by MIND; returns false when unparseable.
inline bool parse_mind_time(const std::string& text, std::int64_t& seconds) {
  int mo = 0, d = 0, y = 0, h = 0, mi = 0, s = 0;
  char ampm[3] = {0, 0, 0};
  if (std::sscanf(text.c_str(), "%d/%d/%d %d:%d:%d %2s", &mo, &d, &y, &h, &mi, &s, ampm) != 7) {
    return false;
  }
  const std::string tag(ampm);
  if ((tag != "AM" && tag != "PM") || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 1 || h > 12 ||
      mi < 0 || mi > 59 || s < 0 || s > 60) {
    return false;
  }
  if (tag == "AM" && h == 12) h = 0;
  if (tag == "PM" && h != 12) h += 12;
  seconds = detail::days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
            h * 3600 + mi * 60 + s;
  return true;
}

// Parses news.tsv. Tokens and entities are registered into the vocabularies
// while they are not frozen (training split) and resolve to UNK otherwise.
inline NewsStore parse_news_file(const std::string& path, Vocabulary& vocab,
                                 EntityVocabulary& entities, const NewsParseOptions& options,
                                 Warnings* warnings = nullptr) {
  std::ifstream is(path);
  if (!is) throw ParseError(path, 0, "cannot open news file");
  NewsStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = detail::strip_cr(std::move(line));
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() != 8) {
      throw ParseError(path, line_no, "expected 8 tab-separated columns, found " +
                                          std::to_string(cols.size()));
    }
    const std::string where = path + ":" + std::to_string(line_no);
    NewsItem item;
    item.id = cols[0];
    item.category = cols[1];
    item.subcategory = cols[2];
    item.title = cols[3];
    item.abstract = cols[4];
    item.url = cols[5];
    item.title_entities = detail::parse_entities(cols[6], where, warnings);
    item.abstract_entities = detail::parse_entities(cols[7], where, warnings);
    if (item.id.empty()) throw ParseError(path, line_no, "empty news id");

    auto title_ids = to_ids(item.title, vocab);
    if (title_ids.empty()) {
      detail::warn(warnings, where + ": title has no tokens, using UNK");
      title_ids.push_back(Vocabulary::kUnk);
    }
    const auto abstract_ids = to_ids(item.abstract, vocab);
    item.title_tokens = make_sequence(title_ids, options.n_w);
    item.abstract_tokens = make_sequence(abstract_ids, options.n_w);
    auto combined = title_ids;
    combined.insert(combined.end(), abstract_ids.begin(), abstract_ids.end());
    item.combined_tokens = make_sequence(combined, options.n_w);

    for (const auto& m : item.title_entities) item.entity_ids.push_back(entities.add(m.wikidata_id, m.label));
    for (const auto& m : item.abstract_entities) {
      const std::size_t id = entities.add(m.wikidata_id, m.label);
      if (!options.title_entities_only) item.entity_ids.push_back(id);
    }
    if (store.find(item.id)) {
      detail::warn(warnings, where + ": duplicate news id " + item.id + " ignored");
      continue;
    }
    store.add(std::move(item));
  }
  return store;
}

inline void write_news_file(const NewsStore& store, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError(path, 0, "cannot write news file");
  for (const auto& n : store.items()) {
    os << n.id << '\t' << n.category << '\t' << n.subcategory << '\t' << n.title << '\t'
       << n.abstract << '\t' << n.url << '\t' << detail::entities_json(n.title_entities) << '\t'
       << detail::entities_json(n.abstract_entities) << '\n';
  }
}

// Parses behaviors.tsv against a news store. Records that reference unknown
// news ids are skipped with a warning; malformed candidates are errors.
inline std::vector<Impression> parse_behaviors_file(const std::string& path, const NewsStore& store,
                                                    std::size_t n_u = 20,
                                                    Warnings* warnings = nullptr) {
  std::ifstream is(path);
  if (!is) throw ParseError(path, 0, "cannot open behaviors file");
  std::vector<Impression> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = detail::strip_cr(std::move(line));
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() != 5) {
      throw ParseError(path, line_no, "expected 5 tab-separated columns, found " +
                                          std::to_string(cols.size()));
    }
    const std::string where = path + ":" + std::to_string(line_no);
    Impression imp;
    imp.id = cols[0];
    imp.user = cols[1];
    imp.time = cols[2];
    if (!parse_mind_time(imp.time, imp.timestamp)) {
      throw ParseError(path, line_no, "unparseable time \"" + imp.time + "\"");
    }
    bool resolvable = true;
    std::string missing;
    for (const auto& id : detail::split_spaces(cols[3])) {
      if (auto idx = store.find(id)) {
        imp.history.push_back(*idx);
      } else {
        resolvable = false;
        missing = id;
      }
    }
    for (const auto& tok : detail::split_spaces(cols[4])) {
      const auto dash = tok.rfind('-');
      const std::string suffix = dash == std::string::npos ? "" : tok.substr(dash + 1);
      if (dash == std::string::npos || dash == 0 || (suffix != "0" && suffix != "1")) {
        throw ParseError(path, line_no, "candidate \"" + tok + "\" lacks a -0/-1 label suffix");
      }
      const std::string id = tok.substr(0, dash);
      if (auto idx = store.find(id)) {
        imp.candidates.push_back({*idx, suffix == "1" ? 1 : 0});
      } else {
        resolvable = false;
        missing = id;
      }
    }
    if (!resolvable) {
      detail::warn(warnings, where + ": unknown news id " + missing + ", record skipped");
      continue;
    }
    if (imp.history.size() > n_u) {
      imp.history.erase(imp.history.begin(), imp.history.end() - static_cast<std::ptrdiff_t>(n_u));
    }
    out.push_back(std::move(imp));
  }
  return out;
}

inline void write_behaviors_file(const std::vector<Impression>& impressions, const NewsStore& store,
                                 const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError(path, 0, "cannot write behaviors file");
  for (const auto& imp : impressions) {
    os << imp.id << '\t' << imp.user << '\t' << imp.time << '\t';
    for (std::size_t i = 0; i < imp.history.size(); ++i)
      os << (i ? " " : "") << store[imp.history[i]].id;
    os << '\t';
    for (std::size_t i = 0; i < imp.candidates.size(); ++i)
      os << (i ? " " : "") << store[imp.candidates[i].news].id << '-' << imp.candidates[i].label;
    os << '\n';
  }
}

struct TrainingSample {
  std::size_t impression = 0;  // index into the impression list
  std::size_t positive = 0;    // news index
  std::vector<std::size_t> negatives;
  bool operator==(const TrainingSample&) const = default;
};

// One sample per clicked candidate. Negatives come from the same
// impression's non-clicked candidates: H drawn without replacement, or with
// replacement when fewer than H exist. Impressions without history are
// skipped (cold-start users do not train).
inline std::vector<TrainingSample> make_training_samples(const std::vector<Impression>& impressions,
                                                         std::size_t negatives_per_positive, Rng& rng,
                                                         Warnings* warnings = nullptr) {
  if (negatives_per_positive == 0) throw ConfigError("training samples: H must be at least 1");
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < impressions.size(); ++i) {
    const auto& imp = impressions[i];
    if (imp.history.empty()) continue;
    std::vector<std::size_t> pool;
    for (const auto& c : imp.candidates)
      if (c.label == 0) pool.push_back(c.news);
    for (const auto& c : imp.candidates) {
      if (c.label != 1) continue;
      if (pool.empty()) {
        detail::warn(warnings, "impression " + imp.id + ": no negatives, sample skipped");
        continue;
      }
      TrainingSample s{i, c.news, {}};
      if (pool.size() >= negatives_per_positive) {
        auto shuffled = pool;
        for (std::size_t k = 0; k < negatives_per_positive; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, shuffled.size() - 1);
          std::swap(shuffled[k], shuffled[pick(rng)]);
          s.negatives.push_back(shuffled[k]);
        }
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t k = 0; k < negatives_per_positive; ++k) s.negatives.push_back(pool[pick(rng)]);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

// Moves the latest `fraction` of impressions (by timestamp, stable) into a
// held-out split.
inline std::pair<std::vector<Impression>, std::vector<Impression>> split_by_time(
    const std::vector<Impression>& impressions, double fraction) {
  std::vector<std::size_t> order(impressions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return impressions[a].timestamp < impressions[b].timestamp;
  });
  const auto held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(order.size())));
  std::pair<std::vector<Impression>, std::vector<Impression>> out;
  for (std::size_t k = 0; k < order.size(); ++k)
    (k + held < order.size() ? out.first : out.second).push_back(impressions[order[k]]);
  return out;
}

}  // namespace perconet
