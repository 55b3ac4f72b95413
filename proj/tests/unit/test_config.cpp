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

#include <gtest/gtest.h>

#include "perconet/model/config.hpp"

namespace perconet {
namespace {

TEST(Config, DefaultsFollowTheMindSetting) {
  const Config c;
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_EQ(c.negatives, 4u);
  EXPECT_EQ(c.lr, 8e-5);
  EXPECT_EQ(c.dropout, 0.2);
  EXPECT_EQ(c.lambda, 1.0);
  EXPECT_EQ(c.top_k, 4u);
  EXPECT_EQ(c.top_g, 20u);
  EXPECT_EQ(c.n_w, 20u);
  EXPECT_EQ(c.n_u, 20u);
  EXPECT_EQ(c.persona_options().capacity, 80u);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, TextRoundTrip) {
  Config c;
  c.lr = 3e-3;
  c.top_g = 7;
  c.use_cl = false;
  c.tau = 0.1;
  const auto back = parse_config_text(config_to_text(c));
  EXPECT_EQ(config_to_text(back), config_to_text(c));
  EXPECT_EQ(back.lr, 3e-3);
  EXPECT_EQ(back.top_g, 7u);
  EXPECT_FALSE(back.use_cl);
}

TEST(Config, ParsesCommentsQuotesAndLayers) {
  Config base;
  base.epochs = 9;
  auto c = parse_config_text("# desk run\nlr = 0.001  # faster\nuse_persona = \"false\"\n\n", base);
  EXPECT_EQ(c.lr, 0.001);
  EXPECT_FALSE(c.use_persona);
  EXPECT_EQ(c.epochs, 9u);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config_text("learning_rate = 1"), ConfigError);
  EXPECT_THROW(parse_config_text("lr 1"), ConfigError);
  EXPECT_THROW(parse_config_text("epochs = -1"), ConfigError);
  EXPECT_THROW(parse_config_text("epochs = 2.5"), ConfigError);
  EXPECT_THROW(parse_config_text("use_cl = yes"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/perconet.toml"), ConfigError);
  Config c;
  c.tau = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.d_r = 10;
  c.heads = 4;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, VariantsSetFlags) {
  for (const auto& name : variant_names()) {
    Config c;
    apply_variant(c, name);
    EXPECT_NO_THROW(validate(c)) << name;
  }
  Config c;
  apply_variant(c, "no-both+abstract");
  EXPECT_FALSE(c.use_persona);
  EXPECT_FALSE(c.use_cl);
  EXPECT_TRUE(c.abstract_as_title);
}

}  // namespace
}  // namespace perconet
