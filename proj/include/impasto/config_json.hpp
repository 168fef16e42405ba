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

// JSON form of ProtectionConfig. Every field is optional on input and
// unknown keys are rejected; output always lists every field, so a dumped
// config parses back to an equal one.

#ifndef IMPASTO_CONFIG_JSON_HPP_
#define IMPASTO_CONFIG_JSON_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "impasto/error.hpp"
#include "impasto/oracle.hpp"
#include "impasto/protect.hpp"

namespace impasto::protect {

using Json = nlohmann::json;

inline std::string_view timestep_policy_name(oracle::TimestepPolicy p) {
  return p == oracle::TimestepPolicy::kFixed ? "fixed" : "uniform";
}

inline oracle::TimestepPolicy parse_timestep_policy(std::string_view s) {
  if (s == "uniform") return oracle::TimestepPolicy::kUniformPerCall;
  if (s == "fixed") return oracle::TimestepPolicy::kFixed;
  throw InvalidConfig("unknown timestep policy '" + std::string(s) + "'");
}

inline Json config_to_json(const ProtectionConfig& c) {
  return Json{
      {"preset", std::string(preset_name(c.preset))},
      {"eta", c.eta},
      {"alpha", c.alpha},
      {"steps", c.steps},
      {"interval", c.interval},
      {"lambda_lpips", c.weights.lambda_lpips},
      {"lambda_lowpass", c.weights.lambda_lowpass},
      {"lambda_clip", c.weights.lambda_clip},
      {"unet_scale", c.weights.unet_scale},
      {"penalty_weight", c.penalty_weight},
      {"penalty_temperature", c.penalty_temperature},
      {"exact_penalty", c.exact_penalty},
      {"m_lo", c.m_lo},
      {"dap_t", c.dap_t},
      {"dap_total", c.dap_total},
      {"omega_step", c.omega_step},
      {"consistency_gain", c.consistency_gain},
      {"pixels_per_degree", c.pixels_per_degree},
      {"wavelet", c.wavelet},
      {"timestep_policy", std::string(timestep_policy_name(c.timestep_policy))},
      {"fixed_timestep", c.fixed_timestep},
      {"use_maps", c.use_maps},
      {"use_iwr", c.use_iwr},
      {"use_dap", c.use_dap},
      {"use_bank", c.use_bank},
      {"seed", c.seed},
  };
}

// Overlays the keys present in `j` onto `base`.
inline ProtectionConfig config_from_json(const Json& j, ProtectionConfig base = {}) {
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  static const std::set<std::string> kKeys = {
      "preset", "eta", "alpha", "steps", "interval", "lambda_lpips",
      "lambda_lowpass", "lambda_clip", "unet_scale", "penalty_weight",
      "penalty_temperature", "exact_penalty", "m_lo", "dap_t", "dap_total",
      "omega_step", "consistency_gain", "pixels_per_degree", "wavelet",
      "timestep_policy", "fixed_timestep", "use_maps", "use_iwr", "use_dap",
      "use_bank", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw InvalidConfig("unknown config key '" + key + "'");
  }
  auto num = [&](const char* k, double& dst) {
    if (!j.contains(k)) return;
    if (!j[k].is_number()) throw InvalidConfig(std::string("'") + k + "' must be a number");
    dst = j[k].get<double>();
  };
  auto integer = [&](const char* k, int& dst) {
    if (!j.contains(k)) return;
    if (!j[k].is_number_integer()) throw InvalidConfig(std::string("'") + k + "' must be an integer");
    dst = j[k].get<int>();
  };
  auto flag = [&](const char* k, bool& dst) {
    if (!j.contains(k)) return;
    if (!j[k].is_boolean()) throw InvalidConfig(std::string("'") + k + "' must be a boolean");
    dst = j[k].get<bool>();
  };
  auto text = [&](const char* k) -> std::string {
    if (!j[k].is_string()) throw InvalidConfig(std::string("'") + k + "' must be a string");
    return j[k].get<std::string>();
  };
  ProtectionConfig c = std::move(base);
  if (j.contains("preset")) c.preset = parse_preset(text("preset"));
  num("eta", c.eta);
  num("alpha", c.alpha);
  integer("steps", c.steps);
  integer("interval", c.interval);
  num("lambda_lpips", c.weights.lambda_lpips);
  num("lambda_lowpass", c.weights.lambda_lowpass);
  num("lambda_clip", c.weights.lambda_clip);
  num("unet_scale", c.weights.unet_scale);
  num("penalty_weight", c.penalty_weight);
  num("penalty_temperature", c.penalty_temperature);
  flag("exact_penalty", c.exact_penalty);
  num("m_lo", c.m_lo);
  integer("dap_t", c.dap_t);
  integer("dap_total", c.dap_total);
  num("omega_step", c.omega_step);
  num("consistency_gain", c.consistency_gain);
  num("pixels_per_degree", c.pixels_per_degree);
  if (j.contains("wavelet")) c.wavelet = text("wavelet");
  if (j.contains("timestep_policy")) c.timestep_policy = parse_timestep_policy(text("timestep_policy"));
  integer("fixed_timestep", c.fixed_timestep);
  flag("use_maps", c.use_maps);
  flag("use_iwr", c.use_iwr);
  flag("use_dap", c.use_dap);
  flag("use_bank", c.use_bank);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
      throw InvalidConfig("'seed' must be a non-negative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.validate();
  return c;
}

inline ProtectionConfig load_config(const std::filesystem::path& p, ProtectionConfig base = {}) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open config " + p.string());
  Json j = Json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw InvalidConfig("config " + p.string() + " is not valid JSON");
  return config_from_json(j, std::move(base));
}

}  // namespace impasto::protect

#endif  // IMPASTO_CONFIG_JSON_HPP_
