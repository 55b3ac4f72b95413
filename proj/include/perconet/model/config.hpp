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
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/persona/persona.hpp"

namespace perconet {

// Every tunable of the model, the persona builder and training. Defaults
// follow the published MIND setup where one exists.
struct Config {
  // training
  std::size_t batch_size = 64;
  std::size_t negatives = 4;  // H
  double lr = 8e-5;
  double dropout = 0.2;
  double lambda = 1.0;
  double tau = 0.05;
  double cl_title_dropout = 0.2;
  std::size_t epochs = 5;
  std::uint64_t seed = 42;
  double dev_fraction = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t threads = 1;  // evaluation workers

  // persona
  std::size_t top_k = 4;
  std::size_t top_g = 20;
  std::size_t n_e = 0;  // 0 means top_g * top_k
  bool title_entities_only = false;

  // text
  std::size_t n_w = 20;
  std::size_t n_u = 20;

  // architecture
  std::size_t d_w = 256;
  std::size_t d_e = 100;
  std::size_t d_r = 256;
  std::size_t d_att = 200;
  std::size_t d_p = 128;
  std::size_t heads = 8;
  double leaky_slope = 0.01;

  // variant flags
  bool use_persona = true;
  bool use_cl = true;
  bool abstract_as_title = false;

  std::size_t persona_capacity() const { return n_e ? n_e : top_g * top_k; }
  PersonaOptions persona_options() const { return {top_g, top_k, persona_capacity()}; }
};

inline const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"full",  "no-persona",     "no-cl",
                                                 "no-both", "no-cl+abstract", "no-both+abstract"};
  return names;
}

// Sets the ablation flags for a named variant.
inline void apply_variant(Config& c, const std::string& variant) {
  if (variant == "full") {
    c.use_persona = true, c.use_cl = true, c.abstract_as_title = false;
  } else if (variant == "no-persona") {
    c.use_persona = false, c.use_cl = true, c.abstract_as_title = false;
  } else if (variant == "no-cl") {
    c.use_persona = true, c.use_cl = false, c.abstract_as_title = false;
  } else if (variant == "no-both") {
    c.use_persona = false, c.use_cl = false, c.abstract_as_title = false;
  } else if (variant == "no-cl+abstract") {
    c.use_persona = true, c.use_cl = false, c.abstract_as_title = true;
  } else if (variant == "no-both+abstract") {
    c.use_persona = false, c.use_cl = false, c.abstract_as_title = true;
  } else {
    std::string valid;
    for (const auto& n : variant_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown variant \"" + variant + "\"; valid variants: " + valid);
  }
}

inline void validate(const Config& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  need(!(c.abstract_as_title && c.use_cl), "abstract_as_title requires use_cl = false");
  need(c.batch_size >= 1, "batch_size must be at least 1");
  need(c.negatives >= 1, "negatives must be at least 1");
  need(c.lr > 0, "lr must be positive");
  need(c.dropout >= 0 && c.dropout < 1, "dropout must lie in [0,1)");
  need(c.cl_title_dropout >= 0 && c.cl_title_dropout < 1, "cl_title_dropout must lie in [0,1)");
  need(c.lambda >= 0, "lambda must be non-negative");
  need(c.tau > 0, "tau must be positive");
  need(c.top_k >= 1 && c.top_g >= 1, "top_k and top_g must be at least 1");
  need(c.n_w >= 1 && c.n_u >= 1, "n_w and n_u must be at least 1");
  need(c.d_w >= 1 && c.d_e >= 1 && c.d_r >= 1 && c.d_att >= 1 && c.d_p >= 1, "dimensions must be positive");
  need(c.heads >= 1 && c.d_r % c.heads == 0, "d_r must be divisible by heads");
  need(c.leaky_slope > 0 && c.leaky_slope < 1, "leaky_slope must lie in (0,1)");
  need(c.dev_fraction >= 0 && c.dev_fraction < 1, "dev_fraction must lie in [0,1)");
  need(c.threads >= 1, "threads must be at least 1");
}

namespace detail {

// Binds each config key to a reader and a writer.
struct ConfigField {
  std::function<void(Config&, const std::string&)> read;
  std::function<std::string(const Config&)> write;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  std::string s = os.str();
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <class U>
ConfigField size_field(U Config::*member) {
  return {[member](Config& c, const std::string& v) {
            std::size_t pos = 0;
            long long parsed = 0;
            try {
              parsed = std::stoll(v, &pos);
            } catch (const std::exception&) {
              pos = 0;
            }
            if (pos != v.size() || pos == 0 || parsed < 0) throw ConfigError("expected a non-negative integer, got " + v);
            c.*member = static_cast<U>(parsed);
          },
          [member](const Config& c) { return std::to_string(c.*member); }};
}

inline ConfigField real_field(double Config::*member) {
  return {[member](Config& c, const std::string& v) {
            std::size_t pos = 0;
            double parsed = 0;
            try {
              parsed = std::stod(v, &pos);
            } catch (const std::exception&) {
              pos = 0;
            }
            if (pos != v.size() || pos == 0) throw ConfigError("expected a number, got " + v);
            c.*member = parsed;
          },
          [member](const Config& c) { return format_double(c.*member); }};
}

inline ConfigField bool_field(bool Config::*member) {
  return {[member](Config& c, const std::string& v) {
            if (v == "true") c.*member = true;
            else if (v == "false") c.*member = false;
            else throw ConfigError("expected true or false, got " + v);
          },
          [member](const Config& c) { return std::string(c.*member ? "true" : "false"); }};
}

inline const std::map<std::string, ConfigField>& config_fields() {
  static const std::map<std::string, ConfigField> fields = {
      {"batch_size", size_field(&Config::batch_size)},
      {"negatives", size_field(&Config::negatives)},
      {"lr", real_field(&Config::lr)},
      {"dropout", real_field(&Config::dropout)},
      {"lambda", real_field(&Config::lambda)},
      {"tau", real_field(&Config::tau)},
      {"cl_title_dropout", real_field(&Config::cl_title_dropout)},
      {"epochs", size_field(&Config::epochs)},
      {"seed", size_field(&Config::seed)},
      {"dev_fraction", real_field(&Config::dev_fraction)},
      {"adam_beta1", real_field(&Config::adam_beta1)},
      {"adam_beta2", real_field(&Config::adam_beta2)},
      {"adam_eps", real_field(&Config::adam_eps)},
      {"threads", size_field(&Config::threads)},
      {"top_k", size_field(&Config::top_k)},
      {"top_g", size_field(&Config::top_g)},
      {"n_e", size_field(&Config::n_e)},
      {"title_entities_only", bool_field(&Config::title_entities_only)},
      {"n_w", size_field(&Config::n_w)},
      {"n_u", size_field(&Config::n_u)},
      {"d_w", size_field(&Config::d_w)},
      {"d_e", size_field(&Config::d_e)},
      {"d_r", size_field(&Config::d_r)},
      {"d_att", size_field(&Config::d_att)},
      {"d_p", size_field(&Config::d_p)},
      {"heads", size_field(&Config::heads)},
      {"leaky_slope", real_field(&Config::leaky_slope)},
      {"use_persona", bool_field(&Config::use_persona)},
      {"use_cl", bool_field(&Config::use_cl)},
      {"abstract_as_title", bool_field(&Config::abstract_as_title)},
  };
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::string valid_config_keys() {
  std::string keys;
  for (const auto& [k, _] : detail::config_fields()) keys += (keys.empty() ? "" : ", ") + k;
  return keys;
}

// Applies one key = value assignment.
inline void set_config_value(Config& c, const std::string& key, const std::string& value) {
  const auto& fields = detail::config_fields();
  auto it = fields.find(key);
  if (it == fields.end()) {
    throw ConfigError("unknown config key \"" + key + "\"; valid keys: " + valid_config_keys());
  }
  try {
    it->second.read(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError("config key " + key + ": " + e.what());
  }
}

// Flat TOML subset: `key = value` lines, '#' comments, optional quotes.
inline Config parse_config_text(const std::string& text, Config base = {}) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    set_config_value(base, key, value);
  }
  return base;
}

inline Config load_config(const std::string& path, Config base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

inline std::string config_to_text(const Config& c) {
  std::string out;
  for (const auto& [k, f] : detail::config_fields()) out += k + " = " + f.write(c) + "\n";
  return out;
}

}  // namespace perconet
