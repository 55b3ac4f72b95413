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

#include <cctype>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/ops.hpp"

namespace perconet {

// String <-> contiguous id map with PAD = 0 and UNK = 1 reserved. Once
// frozen, unseen strings resolve to UNK instead of being registered.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary() {
    tokens_ = {"[PAD]", "[UNK]"};
  }

  std::size_t add(std::string_view token) {
    if (auto id = find(token)) return *id;
    if (frozen_) return kUnk;
    tokens_.emplace_back(token);
    ids_.emplace(tokens_.back(), tokens_.size() - 1);
    return tokens_.size() - 1;
  }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t lookup(std::string_view token) const { return find(token).value_or(kUnk); }

  const std::string& token(std::size_t id) const {
    if (id >= tokens_.size()) throw VocabularyError("vocabulary: id " + std::to_string(id) + " out of range");
    return tokens_[id];
  }

  std::size_t size() const { return tokens_.size(); }
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  // One token per line, ids implied by line order after the reserved ids.
  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw FormatError("vocabulary: cannot write " + path);
    for (std::size_t i = 2; i < tokens_.size(); ++i) os << tokens_[i] << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("vocabulary: cannot read " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (v.find(line)) throw FormatError("vocabulary " + path + ": duplicate token " + line);
      v.add(line);
    }
    v.freeze();
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
  bool frozen_ = false;
};

// Entity ids (WikiData ids) plus the human-readable label seen for each.
class EntityVocabulary : public Vocabulary {
 public:
  std::size_t add(std::string_view wikidata_id, std::string_view label = {}) {
    const std::size_t id = Vocabulary::add(wikidata_id);
    if (id >= labels_.size()) labels_.resize(id + 1);
    if (labels_[id].empty() && id != kUnk) labels_[id] = std::string(label);
    return id;
  }

  // Surface form for reports; falls back to the WikiData id.
  std::string label(std::size_t id) const {
    if (id < labels_.size() && !labels_[id].empty()) return labels_[id];
    return token(id);
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw FormatError("entity vocabulary: cannot write " + path);
    for (std::size_t i = 2; i < size(); ++i) os << token(i) << '\t' << label(i) << '\n';
  }

  static EntityVocabulary load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("entity vocabulary: cannot read " + path);
    EntityVocabulary v;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto tab = line.find('\t');
      const std::string key = line.substr(0, tab);
      v.add(key, tab == std::string::npos ? std::string_view{} : std::string_view(line).substr(tab + 1));
    }
    v.freeze();
    return v;
  }

 private:
  std::vector<std::string> labels_;
};

// Lowercases ASCII letters and splits on anything that is not an ASCII
// letter or digit. Bytes >= 0x80 stay inside tokens so UTF-8 words survive.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct TokenSequence {
  std::vector<std::size_t> ids;  // length n_w, PAD-filled
  Mask mask;                     // true at real tokens

  std::size_t length() const { return ids.size(); }
  std::size_t real_tokens() const {
    std::size_t n = 0;
    for (bool b : mask) n += b;
    return n;
  }
  bool empty() const { return real_tokens() == 0; }
};

// Pads or truncates token ids to exactly n_w.
inline TokenSequence make_sequence(const std::vector<std::size_t>& token_ids, std::size_t n_w) {
  TokenSequence seq{std::vector<std::size_t>(n_w, Vocabulary::kPad), Mask(n_w, false)};
  for (std::size_t i = 0; i < token_ids.size() && i < n_w; ++i) {
    seq.ids[i] = token_ids[i];
    seq.mask[i] = token_ids[i] != Vocabulary::kPad;
  }
  return seq;
}

// Tokenizes text against a vocabulary. A growing vocabulary registers new
// tokens; a frozen one maps them to UNK.
inline std::vector<std::size_t> to_ids(std::string_view text, Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(vocab.add(tok));
  return ids;
}

}  // namespace perconet
