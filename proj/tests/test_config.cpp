// Copyright 2026 The impasto Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"

namespace impasto::protect {
namespace {

using testing::Rng;
using testing::ScratchDir;

ProtectionConfig random_config(Rng& rng) {
  ProtectionConfig c;
  c.preset = kAllPresets[rng.index(kAllPresets.size())];
  c.eta = rng.uniform(1.0, 16.0) / 255.0;
  c.alpha = rng.uniform(0.1, 4.0) / 255.0;
  c.steps = rng.integer(0, 300);
  c.interval = rng.integer(1, 10);
  c.weights.lambda_lpips = rng.uniform(0.0, 10.0);
  c.weights.lambda_lowpass = rng.uniform(0.0, 20.0);
  c.weights.lambda_clip = rng.uniform(0.0, 1.0);
  c.weights.unet_scale = rng.uniform(0.0, 1.0);
  c.penalty_weight = rng.uniform(0.0, 3.0);
  c.penalty_temperature = rng.uniform(0.001, 0.1);
  c.exact_penalty = rng.uniform() < 0.5;
  c.m_lo = rng.uniform();
  c.dap_total = rng.integer(1, 50);
  c.dap_t = rng.integer(1, c.dap_total);
  c.omega_step = rng.uniform(0.0, 0.1);
  c.consistency_gain = rng.uniform(0.0, 1e8);
  c.pixels_per_degree = rng.uniform(5.0, 60.0);
  c.wavelet = rng.uniform() < 0.5 ? "haar" : "db2";
  c.timestep_policy = rng.uniform() < 0.5 ? oracle::TimestepPolicy::kFixed
                                          : oracle::TimestepPolicy::kUniformPerCall;
  c.fixed_timestep = rng.integer(0, 999);
  c.use_maps = rng.uniform() < 0.5;
  c.use_iwr = rng.uniform() < 0.5;
  c.use_dap = rng.uniform() < 0.5;
  c.use_bank = rng.uniform() < 0.5;
  c.seed = rng.engine()();
  return c;
}

TEST(ConfigJson, RoundtripsExactlyThroughText) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const ProtectionConfig c = random_config(rng);
    const std::string text = config_to_json(c).dump();
    EXPECT_EQ(config_from_json(Json::parse(text)), c) << text;
  }
}

TEST(ConfigJson, ListsEveryField) {
  const Json j = config_to_json(ProtectionConfig{});
  EXPECT_EQ(j.size(), 26u);
  EXPECT_EQ(j["preset"], "photoguard");
  EXPECT_EQ(j["timestep_policy"], "uniform");
}

TEST(ConfigJson, PartialOverlayKeepsBase) {
  ProtectionConfig base;
  base.steps = 7;
  const ProtectionConfig c =
      config_from_json(Json::parse(R"({"preset":"mist","eta":0.05})"), base);
  EXPECT_EQ(c.preset, Preset::kMist);
  EXPECT_EQ(c.eta, 0.05);
  EXPECT_EQ(c.steps, 7);
  EXPECT_EQ(c.alpha, base.alpha);
}

TEST(ConfigJson, RejectsUnknownKeysAndWrongTypes) {
  for (const char* bad : {
           R"({"etaa": 0.1})",
           R"({"eta": "8/255"})",
           R"({"steps": 1.5})",
           R"({"use_dap": 1})",
           R"({"preset": 3})",
           R"({"preset": "glaze"})",
           R"({"seed": -1})",
           R"({"timestep_policy": "sometimes"})",
           R"({"wavelet": "coif1"})",
           R"({"interval": 0})",
           R"([1, 2])",
       }) {
    EXPECT_THROW(config_from_json(Json::parse(bad)), InvalidConfig) << bad;
  }
}

TEST(ConfigJson, LoadsFromFile) {
  ScratchDir dir("config");
  std::ofstream(dir / "c.json") << R"({"steps": 3, "use_dap": false})";
  const ProtectionConfig c = load_config(dir / "c.json");
  EXPECT_EQ(c.steps, 3);
  EXPECT_FALSE(c.use_dap);
  std::ofstream(dir / "bad.json") << "{ steps: 3 ";
  EXPECT_THROW(load_config(dir / "bad.json"), InvalidConfig);
  EXPECT_THROW(load_config(dir / "missing.json"), IoError);
}

}  // namespace
}  // namespace impasto::protect
