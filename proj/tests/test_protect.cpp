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

#include <sstream>

#include "test_support.hpp"

namespace impasto::protect {
namespace {

using testing::Rng;

ImageTensor test_image(std::uint64_t seed, std::size_t n = 32, std::size_t c = 3) {
  Rng rng(seed);
  return ImageTensor(rng.image(n, n, c));
}

ImageTensor grid_for(const Tensor& x) {
  return ImageTensor(make_grid_target(x.height(), x.width(), x.channels()));
}

ProtectionConfig quick_config(int steps = 12) {
  ProtectionConfig c;
  c.steps = steps;
  c.seed = 42;
  return c;
}

ProtectionConfig plain_pgd_config(int steps) {
  ProtectionConfig c = quick_config(steps);
  c.use_maps = false;
  c.use_iwr = false;
  c.use_dap = false;
  c.use_bank = false;
  c.penalty_weight = 0.0;
  return c;
}

// Plain signed-gradient ascent with box projection, written without any of
// the library's step helpers.
Tensor reference_pgd(const Tensor& x, const oracle::LspSpec& spec, const ProtectionConfig& c,
                     oracle::GuidanceOracle& orc) {
  Tensor cur = x;
  for (int i = 1; i <= c.steps; ++i) {
    const Tensor g = orc.eval_lsp(cur, spec, step_seed(c.seed, i)).grad;
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const double s = g[k] > 0.0 ? 1.0 : (g[k] < 0.0 ? -1.0 : 0.0);
      const double lo = std::max(x[k] - c.eta, 0.0), hi = std::min(x[k] + c.eta, 1.0);
      cur[k] = std::min(std::max(cur[k] + c.alpha * s, lo), hi);
    }
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Projection and step.

TEST(Projection, Examples) {
  const double eta = 8.0 / 255.0;
  const Tensor x(1, 3, 1, std::vector<double>{0.5, 0.0, 0.5});
  const Tensor cand(1, 3, 1, std::vector<double>{0.6, -0.1, 0.51});
  const Tensor p = project_linf(x, cand, eta);
  EXPECT_NEAR(p[0], 0.53137, 1e-5);
  EXPECT_EQ(p[0], 0.5 + eta);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_EQ(p[2], 0.51);
}

TEST(Projection, PropertiesOnRandomInputs) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const Tensor x = rng.tensor(4, 4, 3);
    const Tensor cand = rng.tensor(4, 4, 3, -0.2, 1.2);
    const double eta = rng.uniform(0.001, 0.1);
    const Tensor p = project_linf(x, cand, eta);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_LE(std::abs(p[i] - x[i]), eta + 1e-15);
      EXPECT_GE(p[i], 0.0);
      EXPECT_LE(p[i], 1.0);
      if (std::abs(cand[i] - x[i]) <= eta && cand[i] >= 0.0 && cand[i] <= 1.0) {
        EXPECT_EQ(p[i], cand[i]);
      }
    }
    EXPECT_EQ(max_abs_diff(project_linf(x, p, eta), p), 0.0);
  }
}

TEST(Step, ZeroAlphaIsIdentity) {
  Rng rng(2);
  const Tensor x = rng.tensor(8, 8, 3, 0.1, 0.9);
  const Tensor prev = project_linf(x, x + rng.tensor(8, 8, 3, -0.02, 0.02), 0.03);
  const Tensor step = signed_step(rng.tensor(8, 8, 3, -1.0, 1.0), 0.0);
  const Tensor ones(8, 8, 1, 1.0);
  EXPECT_EQ(max_abs_diff(apply_step(x, prev, step, ones, ones, 0.03), prev), 0.0);
}

TEST(Step, MagnitudeBoundedByModulation) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Tensor x = rng.tensor(8, 8, 3);
    const Tensor g = rng.tensor(8, 8, 3, -1.0, 1.0);
    const Tensor m = rng.tensor(8, 8, 1, 0.6, 1.0), d = rng.tensor(8, 8, 1, 0.5, 1.0);
    const double alpha = 2.0 / 255.0;
    const Tensor next = apply_step(x, x, signed_step(g, alpha), m, d, 8.0 / 255.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_LE(std::abs(next[i] - x[i]), alpha * m[i / 3] * d[i / 3] + 1e-15);
    }
  }
}

// ---------------------------------------------------------------------------
// Presets and config.

TEST(Presets, NamesAndLambdas) {
  for (Preset p : kAllPresets) EXPECT_EQ(parse_preset(preset_name(p)), p);
  EXPECT_EQ(preset_lambdas(Preset::kPhotoguard), std::make_pair(1.0, 0.0));
  EXPECT_EQ(preset_lambdas(Preset::kAdvdm), std::make_pair(0.0, 1.0));
  for (Preset p : {Preset::kMist, Preset::kAntiDb, Preset::kDiffProtect}) {
    EXPECT_EQ(preset_lambdas(p), std::make_pair(1.0, 1.0));
  }
  EXPECT_THROW(parse_preset("glaze"), InvalidConfig);
}

TEST(Config, DefaultsAndValidation) {
  const ProtectionConfig c;
  EXPECT_EQ(c.eta, 8.0 / 255.0);
  EXPECT_EQ(c.alpha, 2.0 / 255.0);
  EXPECT_EQ(c.steps, 100);
  EXPECT_EQ(c.interval, 4);
  EXPECT_EQ(c.m_lo, 0.5);
  EXPECT_EQ(c.dap_t, 5);
  EXPECT_EQ(c.dap_total, 25);
  EXPECT_NO_THROW(c.validate());
  auto broken = [](auto mutate) {
    ProtectionConfig b;
    mutate(b);
    return b;
  };
  EXPECT_THROW(broken([](auto& b) { b.eta = 0.0; }).validate(), InvalidConfig);
  EXPECT_THROW(broken([](auto& b) { b.alpha = -1.0; }).validate(), InvalidConfig);
  EXPECT_THROW(broken([](auto& b) { b.steps = -1; }).validate(), InvalidConfig);
  EXPECT_THROW(broken([](auto& b) { b.interval = 0; }).validate(), InvalidConfig);
  EXPECT_THROW(broken([](auto& b) { b.m_lo = 1.5; }).validate(), InvalidConfig);
  EXPECT_THROW(broken([](auto& b) { b.dap_t = 30; }).validate(), InvalidConfig);
  EXPECT_THROW(broken([](auto& b) { b.wavelet = "coif"; }).validate(), InvalidConfig);
}

TEST(Target, GridIsMidGrayCheckerboard) {
  const Tensor g = make_grid_target(64, 48, 3);
  double sum = 0.0;
  for (double v : g.values()) sum += v;
  EXPECT_NEAR(sum / g.size(), 0.5, 1e-12);
  EXPECT_EQ(g(0, 0, 0), 0.2);
  EXPECT_EQ(g(0, 16, 1), 0.8);
  EXPECT_EQ(g(16, 16, 2), 0.2);
  EXPECT_EQ(g(15, 15, 0), 0.2);
}

// ---------------------------------------------------------------------------
// Difficulty map.

TEST(Dap, UnperturbedImageGivesOnes) {
  oracle::SurrogateOracle orc;
  const ImageTensor x = test_image(4);
  const Tensor d = dap_difficulty(x, x, ProtectionConfig{}, orc, 1);
  for (double v : d.values()) EXPECT_EQ(v, 1.0);
}

TEST(Dap, PerturbedHalfIsStrictlyHarder) {
  oracle::SurrogateOracle orc;
  const ImageTensor image = test_image(5, 32);
  const Tensor& x = image;
  Rng rng(6);
  Tensor xi = x;
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t xx = 16; xx < 32; ++xx)
      for (std::size_t c = 0; c < 3; ++c)
        xi(y, xx, c) = std::clamp(x(y, xx, c) + (rng.uniform() < 0.5 ? -0.03 : 0.03), 0.0, 1.0);
  ProtectionConfig cfg;
  const Tensor d = dap_difficulty(x, xi, cfg, orc, 1);
  // The 7x7 box reaches three columns across the seam.
  double left_max = 0.0, right_min = 1.0;
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t xx = 0; xx < 12; ++xx) left_max = std::max(left_max, d(y, xx));
    for (std::size_t xx = 16; xx < 32; ++xx) right_min = std::min(right_min, d(y, xx));
  }
  EXPECT_LT(left_max, right_min);
  for (double v : d.values()) {
    EXPECT_GE(v, cfg.m_lo);
    EXPECT_LE(v, 1.0);
  }

  // Same map from the surrogate formulas spelled out here.
  const auto k = oracle::gaussian5(1.0);
  auto dp = [&](const Tensor& t) {
    const Tensor b = correlate_replicate(t, k, 5);
    Tensor o = t;
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = t[i] + 1.5 * (t[i] - b[i]);
    return o;
  };
  const Tensor a = dp(x), b = dp(xi);
  Tensor dist(32, 32, 1);
  for (long y = 0; y < 32; ++y)
    for (long xx = 0; xx < 32; ++xx) {
      double acc = 0.0;
      for (long dy = -3; dy <= 3; ++dy)
        for (long dx = -3; dx <= 3; ++dx) {
          const long yy = std::clamp(y + dy, 0L, 31L), xc = std::clamp(xx + dx, 0L, 31L);
          for (std::size_t c = 0; c < 3; ++c) acc += std::pow(a(yy, xc, c) - b(yy, xc, c), 2) / 3.0;
        }
      dist(y, xx) = acc / 49.0;
    }
  const auto [lo, hi] = std::minmax_element(dist.values().begin(), dist.values().end());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(d[i], 0.5 + 0.5 * (dist[i] - *lo) / (*hi - *lo), 1e-9);
  }
}

TEST(Dap, MissingCapabilityWarnsAndDisables) {
  oracle::SurrogateOptions opt;
  opt.capabilities.remove(oracle::Capability::kDiffusionRoundtrip);
  oracle::SurrogateOracle orc(opt);
  const ImageTensor x = test_image(7);
  std::vector<std::string> warnings;
  const Tensor d = dap_difficulty(x, x + Tensor(32, 32, 3, 0.01), ProtectionConfig{}, orc, 1,
                                  [&](std::string_view w) { warnings.emplace_back(w); });
  EXPECT_EQ(warnings.size(), 1u);
  for (double v : d.values()) EXPECT_EQ(v, 1.0);
}

TEST(Dap, DefaultRoundtripStepsReachTheOracle) {
  struct Recorder : oracle::GuidanceOracle {
    std::vector<std::pair<int, int>> calls;
    std::string name() const override { return "recorder"; }
    oracle::Capabilities capabilities() const override {
      return {oracle::Capability::kDiffusionRoundtrip, oracle::Capability::kSpatialDistance};
    }
    oracle::LspValue eval_lsp(const Tensor&, const oracle::LspSpec&, std::uint64_t) override {
      throw UnsupportedOperation("no");
    }
    Tensor diffusion_roundtrip(const Tensor& x, int t, int total, std::uint64_t) override {
      calls.emplace_back(t, total);
      return x;
    }
    Tensor spatial_distance(const Tensor& a, const Tensor&) override {
      return Tensor(a.height(), a.width(), 1);
    }
  } rec;
  const ImageTensor x = test_image(8);
  dap_difficulty(x, x, ProtectionConfig{}, rec, 1);
  ASSERT_EQ(rec.calls.size(), 2u);
  EXPECT_EQ(rec.calls[0], std::make_pair(5, 25));
}

// ---------------------------------------------------------------------------
// Full runs.

TEST(Run, ZeroStepsReturnsInput) {
  oracle::SurrogateOracle orc;
  const ImageTensor x = test_image(10);
  const ProtectionResult r = protect_run(x, grid_for(x), quick_config(0), orc);
  EXPECT_EQ(max_abs_diff(r.protected_image, x), 0.0);
  EXPECT_EQ(max_abs(r.delta), 0.0);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.iwr_events, 0);
}

TEST(Run, InvariantsHoldAfterEveryStep) {
  oracle::SurrogateOracle orc;
  const ImageTensor x = test_image(11);
  for (Preset p : kAllPresets) {
    ProtectionConfig c = quick_config(16);
    c.preset = p;
    std::vector<TraceEntry> seen;
    RunHooks hooks;
    hooks.on_step = [&](const TraceEntry& e) { seen.push_back(e); };
    const ProtectionResult r = protect_run(x, grid_for(x), c, orc, hooks);
    ASSERT_EQ(r.trace.size(), 17u);
    ASSERT_EQ(seen.size(), 17u);
    for (const auto& e : r.trace) EXPECT_LE(e.linf, c.eta + 1e-6) << preset_name(p);
    for (double v : r.protected_image.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(max_abs_diff(r.protected_image, x), c.eta + 1e-6);
    EXPECT_EQ(max_abs_diff(r.delta, r.protected_image - x), 0.0);
    for (double v : r.difficulty_map.values()) {
      EXPECT_GE(v, c.m_lo);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Run, MatchesPlainPgdReferenceBitExactly) {
  oracle::SurrogateOracle orc;
  for (Preset p : {Preset::kPhotoguard, Preset::kAdvdm, Preset::kMist}) {
    const ImageTensor x = test_image(12);
    ProtectionConfig c = plain_pgd_config(10);
    c.preset = p;
    const ProtectionResult r = protect_run(x, grid_for(x), c, orc);
    const Tensor ref = reference_pgd(x, make_spec(c, grid_for(x)), c, orc);
    EXPECT_EQ(max_abs_diff(r.protected_image, ref), 0.0) << preset_name(p);
  }
}

TEST(Run, EventCountsFollowInterval) {
  oracle::SurrogateOracle orc;
  const ImageTensor x = test_image(13);
  for (auto [n, p] : {std::pair{12, 4}, {13, 4}, {10, 3}, {3, 4}, {7, 1}}) {
    ProtectionConfig c = quick_config(n);
    c.interval = p;
    std::ostringstream log;
    RunHooks hooks;
    hooks.omega_log = &log;
    const ProtectionResult r = protect_run(x, grid_for(x), c, orc, hooks);
    EXPECT_EQ(r.iwr_events, n / p);
    EXPECT_EQ(r.dap_events, n / p);
    int flagged = 0;
    for (const auto& e : r.trace) flagged += e.iwr;
    EXPECT_EQ(flagged, n / p);
    const std::string text = log.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), n / p);
  }
}

TEST(Run, DisabledStagesDoNotRun) {
  oracle::SurrogateOracle orc;
  const ImageTensor x = test_image(14);
  ProtectionConfig c = quick_config(8);
  c.use_iwr = false;
  c.use_dap = false;
  const ProtectionResult r = protect_run(x, grid_for(x), c, orc);
  EXPECT_EQ(r.iwr_events, 0);
  EXPECT_EQ(r.dap_events, 0);
  for (double v : r.omega.weights()) EXPECT_NEAR(v, 0.2, 1e-15);
  for (double v : r.difficulty_map.values()) EXPECT_EQ(v, 1.0);
}

TEST(Run, DeterministicGivenSeed) {
  oracle::SurrogateOracle a, b;
  const ImageTensor x = test_image(15);
  const ProtectionConfig c = quick_config(12);
  const ProtectionResult r1 = protect_run(x, grid_for(x), c, a);
  const ProtectionResult r2 = protect_run(x, grid_for(x), c, b);
  EXPECT_EQ(max_abs_diff(r1.protected_image, r2.protected_image), 0.0);
  EXPECT_EQ(r1.omega.omega, r2.omega.omega);
}

TEST(Run, ProtectionLossIncreases) {
  oracle::SurrogateOracle orc;
  const ImageTensor x = test_image(16, 64);
  ProtectionConfig c = quick_config(100);
  const ProtectionResult r = protect_run(x, grid_for(x), c, orc);
  EXPECT_GT(r.trace.back().lsp, r.trace.front().lsp);
}

TEST(Run, RejectsMismatchedTarget) {
  oracle::SurrogateOracle orc;
  const ImageTensor x = test_image(17);
  const ImageTensor y(Tensor(32, 32, 1, 0.5));
  EXPECT_THROW(protect_run(x, y, quick_config(2), orc), InvalidInput);
}

TEST(Run, OracleFailureAbortsWithPartialTrace) {
  struct Flaky : oracle::GuidanceOracle {
    oracle::SurrogateOracle inner;
    int calls = 0;
    std::string name() const override { return "flaky"; }
    oracle::Capabilities capabilities() const override { return inner.capabilities(); }
    oracle::LspValue eval_lsp(const Tensor& x, const oracle::LspSpec& s, std::uint64_t seed) override {
      if (++calls == 4) throw OracleError("worker went away");
      return inner.eval_lsp(x, s, seed);
    }
  } flaky;
  const ImageTensor x = test_image(18);
  ProtectionConfig c = plain_pgd_config(10);
  try {
    protect_run(x, grid_for(x), c, flaky);
    FAIL() << "expected abort";
  } catch (const RunAborted& e) {
    EXPECT_EQ(e.trace().size(), 3u);
    EXPECT_NE(std::string(e.what()).find("worker went away"), std::string::npos);
  }
}

TEST(Run, SensitivityMassDefinition) {
  const Tensor s(2, 1, 1, std::vector<double>{0.5, 2.0});
  const Tensor d(2, 1, 2, std::vector<double>{0.1, -0.2, -0.3, 0.0});
  EXPECT_NEAR(sensitivity_mass(s, d), 0.5 * 0.3 + 2.0 * 0.3, 1e-15);
}

}  // namespace
}  // namespace impasto::protect
