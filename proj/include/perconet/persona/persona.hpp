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
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/graph.hpp"
#include "perconet/core/ops.hpp"
#include "perconet/data/mind.hpp"
#include "perconet/text/vocabulary.hpp"

namespace perconet {

// A user's explicit persona: up to n_e distinct entities drawn from recent
// reads. Real entries form a prefix; the tail is PAD with mask false.
struct Persona {
  std::string user;
  std::vector<std::size_t> entity_ids;
  Mask mask;
  std::vector<std::vector<std::string>> provenance;  // news ids per entry

  std::size_t count() const {
    std::size_t n = 0;
    for (bool b : mask) n += b;
    return n;
  }
  bool cold() const { return count() == 0; }
  bool operator==(const Persona&) const = default;
};

struct PersonaOptions {
  std::size_t recent_items = 20;     // G
  std::size_t entities_per_item = 4; // K
  std::size_t capacity = 80;         // n_e
};

// Takes the G most recent history items, the first K listed entities of
// each, and keeps the n_e entities that occur in the most items, ties going
// to the entity seen earliest when walking from the newest item backwards.
// UNK entities (unseen at training time) are never selected. An empty
// history yields an all-PAD persona.
inline Persona build_persona(const std::string& user, const std::vector<std::size_t>& history,
                             const NewsStore& store, const PersonaOptions& options) {
  if (options.recent_items == 0 || options.entities_per_item == 0 || options.capacity == 0) {
    throw ConfigError("persona: G, K and n_e must all be at least 1");
  }
  struct Stat {
    std::size_t frequency = 0;
    std::size_t first_seen = 0;  // rank in newest-first walk order
    std::vector<std::string> sources;
  };
  std::unordered_map<std::size_t, Stat> stats;
  std::vector<std::size_t> order;
  std::size_t rank = 0;
  const std::size_t take = std::min(options.recent_items, history.size());
  for (std::size_t back = 0; back < take; ++back) {
    const NewsItem& item = store.at(history[history.size() - 1 - back]);
    const std::size_t k = std::min(options.entities_per_item, item.entity_ids.size());
    std::vector<std::size_t> seen_here;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t e = item.entity_ids[j];
      if (e == Vocabulary::kUnk || e == Vocabulary::kPad) continue;
      if (std::find(seen_here.begin(), seen_here.end(), e) != seen_here.end()) continue;
      seen_here.push_back(e);
      auto [it, fresh] = stats.try_emplace(e);
      if (fresh) {
        it->second.first_seen = rank;
        order.push_back(e);
      }
      ++rank;
      it->second.frequency += 1;
      it->second.sources.push_back(item.id);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Stat& sa = stats.at(a);
    const Stat& sb = stats.at(b);
    if (sa.frequency != sb.frequency) return sa.frequency > sb.frequency;
    return sa.first_seen < sb.first_seen;
  });
  Persona p{user, std::vector<std::size_t>(options.capacity, Vocabulary::kPad),
            Mask(options.capacity, false), std::vector<std::vector<std::string>>(options.capacity)};
  for (std::size_t i = 0; i < order.size() && i < options.capacity; ++i) {
    p.entity_ids[i] = order[i];
    p.mask[i] = true;
    p.provenance[i] = stats.at(order[i]).sources;
  }
  return p;
}

// Entity embedding rows for a persona: [n_e x d_e], masked rows zero.
template <class T>
Var<T> persona_embeddings(Graph<T>& g, const Persona& p, ParamId entity_table) {
  return gather_rows(g.param(entity_table), p.entity_ids, p.mask);
}

// Report line: user \t label(N1 N2),label(N3)
inline std::string persona_report_line(const Persona& p, const EntityVocabulary& entities) {
  std::ostringstream os;
  os << p.user << '\t';
  bool first = true;
  for (std::size_t i = 0; i < p.entity_ids.size(); ++i) {
    if (!p.mask[i]) continue;
    if (!first) os << ',';
    first = false;
    os << entities.label(p.entity_ids[i]) << '(';
    for (std::size_t k = 0; k < p.provenance[i].size(); ++k)
      os << (k ? " " : "") << p.provenance[i][k];
    os << ')';
  }
  return os.str();
}

struct PersonaReportEntry {
  std::string user;
  std::vector<std::pair<std::string, std::vector<std::string>>> entities;  // label, news ids
};

// Inverse of persona_report_line. Labels may contain commas; an entry ends
// at ")," or at the end of the line.
inline PersonaReportEntry parse_persona_report_line(const std::string& line) {
  const auto tab = line.find('\t');
  if (tab == std::string::npos) throw FormatError("persona report: missing tab in \"" + line + "\"");
  PersonaReportEntry entry{line.substr(0, tab), {}};
  std::string rest = line.substr(tab + 1);
  while (!rest.empty()) {
    auto close = rest.find("),");
    const bool last = close == std::string::npos;
    if (last) {
      if (rest.back() != ')') throw FormatError("persona report: unterminated entry in \"" + line + "\"");
      close = rest.size() - 1;
    }
    const std::string item = rest.substr(0, close);
    const auto open = item.rfind('(');
    if (open == std::string::npos) throw FormatError("persona report: missing provenance in \"" + line + "\"");
    entry.entities.emplace_back(item.substr(0, open), detail::split_spaces(item.substr(open + 1)));
    rest = last ? std::string() : rest.substr(close + 2);
  }
  return entry;
}

}  // namespace perconet
