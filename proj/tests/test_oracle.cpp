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

#include "test_support.hpp"

namespace impasto::oracle {
namespace {

using testing::central_difference;
using testing::rel_error;
using testing::Rng;

LspSpec spec_for(const Tensor& like, double le, double lsd) {
  LspSpec s;
  s.lambda_e = le;
  s.lambda_sd = lsd;
  if (le > 0.0) s.target = protect::make_grid_target(like.height(), like.width(), like.channels());
  return s;
}

TEST(Surrogate, EncoderLossVanishesAtTarget) {
  SurrogateOracle orc;
  const Tensor y = protect::make_grid_target(16, 16, 3);
  LspSpec s;
  s.target = y;
  const LspValue v = orc.eval_lsp(y, s, 0);
  EXPECT_EQ(v.loss, 0.0);
  EXPECT_EQ(max_abs(v.grad), 0.0);
}

TEST(Surrogate, EncoderLossMatchesExplicitProjection) {
  Rng rng(1);
  SurrogateOracle orc;
  const Tensor x = rng.image(16, 16, 3);
  const LspSpec s = spec_for(x, 1.0, 0.0);
  const SeededProjection a = orc.projection('A', x.size());
  double expected = 0.0;
  for (std::size_t r = 0; r < kProjectionRows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) acc += a.at(r, c) * (x[c] - s.target[c]);
    expected += acc * acc;
  }
  const LspValue v = orc.eval_lsp(x, s, 0);
  EXPECT_NEAR(v.encoder_loss, expected, 1e-10 * expected);
  EXPECT_NEAR(v.loss, -expected, 1e-10 * expected);
  EXPECT_EQ(v.diffusion_loss, 0.0);
}

TEST(Surrogate, ProjectionsAreSeededAndDistinct) {
  SurrogateOracle a, b;
  SurrogateOptions other;
  other.seed = 99;
  SurrogateOracle c(other);
  const auto& pa = a.projection('A', 48);
  EXPECT_EQ(pa.rows(), kProjectionRows);
  EXPECT_EQ(pa.at(3, 7), b.projection('A', 48).at(3, 7));
  EXPECT_NE(pa.at(3, 7), a.projection('C', 48).at(3, 7));
  EXPECT_NE(pa.at(3, 7), c.projection('A', 48).at(3, 7));
  const double bound = std::sqrt(3.0 / 48.0);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t k = 0; k < 48; ++k) EXPECT_LE(std::abs(pa.at(r, k)), bound);
}

TEST(Surrogate, ProjectionEntriesDependOnlyOnSeedAndIndex) {
  // One matrix above the materialization limit, one below.
  const std::size_t wide = SeededProjection::kMaterializeLimit / 64 + 1;
  for (std::size_t cols : {wide, std::size_t{48}}) {
    const SeededProjection p(5, 64, cols);
    const double scale = std::sqrt(3.0 / static_cast<double>(cols));
    for (std::size_t r : {0u, 17u, 63u}) {
      for (std::size_t c : {std::size_t{0}, cols / 2, cols - 1}) {
        EXPECT_EQ(p.at(r, c), scale * detail::uniform_pm1(5, r * cols + c));
      }
    }
  }
}

TEST(Surrogate, GradientMatchesCentralDifferences) {
  Rng rng(2);
  SurrogateOracle orc;
  for (auto [le, lsd] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {0.7, 2.0}}) {
    const Tensor x = rng.image(16, 16, 3);
    const LspSpec s = spec_for(x, le, lsd);
    const LspValue v = orc.eval_lsp(x, s, 0);
    auto f = [&](const Tensor& t) { return orc.eval_lsp(t, s, 0).loss; };
    const double scale = max_abs(v.grad);
    for (int k = 0; k < 64; ++k) {
      const std::size_t i = rng.index(x.size());
      const double fd = central_difference(f, x, i, 1e-5);
      EXPECT_LT(rel_error(v.grad[i], fd, 1e-4 * scale), 1e-4) << le << "/" << lsd << " i=" << i;
    }
  }
}

TEST(Surrogate, PresetMixturesSelectTerms) {
  Rng rng(3);
  SurrogateOracle orc;
  const Tensor x = rng.image(16, 16, 3);
  const LspValue pg = orc.eval_lsp(x, spec_for(x, 1.0, 0.0), 0);
  const LspValue ad = orc.eval_lsp(x, spec_for(x, 0.0, 1.0), 0);
  const LspValue both = orc.eval_lsp(x, spec_for(x, 1.0, 1.0), 0);
  EXPECT_EQ(pg.loss, -pg.encoder_loss);
  EXPECT_EQ(ad.loss, ad.diffusion_loss);
  EXPECT_EQ(ad.encoder_loss, 0.0);
  EXPECT_NEAR(both.loss, -pg.encoder_loss + ad.diffusion_loss, 1e-12);
  EXPECT_LE(max_abs_diff(both.grad, pg.grad + ad.grad), 1e-12);
}

TEST(Surrogate, DeterministicGivenInputs) {
  Rng rng(4);
  SurrogateOracle a, b;
  const Tensor x = rng.image(16, 16, 3);
  const LspSpec s = spec_for(x, 1.0, 1.0);
  const LspValue u = a.eval_lsp(x, s, 17), v = b.eval_lsp(x, s, 17);
  EXPECT_EQ(u.loss, v.loss);
  EXPECT_EQ(max_abs_diff(u.grad, v.grad), 0.0);
}

TEST(Surrogate, SpecValidation) {
  SurrogateOracle orc;
  const Tensor x(16, 16, 3, 0.5);
  EXPECT_THROW(orc.eval_lsp(x, spec_for(x, 0.0, 0.0), 0), InvalidConfig);
  EXPECT_THROW(orc.eval_lsp(x, spec_for(x, -1.0, 1.0), 0), InvalidConfig);
  LspSpec wrong;
  wrong.target = Tensor(8, 8, 3, 0.5);
  EXPECT_THROW(orc.eval_lsp(x, wrong, 0), InvalidInput);
}

TEST(Surrogate, RoundtripOfConstantIsUnchanged) {
  SurrogateOracle orc;
  const Tensor x(20, 20, 3, 0.37);
  EXPECT_LE(max_abs_diff(orc.diffusion_roundtrip(x, kDefaultRoundtripSteps, kDefaultTotalSteps, 0), x),
            1e-15);
  EXPECT_EQ(kDefaultRoundtripSteps, 5);
  EXPECT_EQ(kDefaultTotalSteps, 25);
}

TEST(Surrogate, RoundtripOfImpulseMatchesDirectConvolution) {
  SurrogateOracle orc;
  Tensor x(16, 16, 1, 0.0);
  x(8, 8) = 1.0;
  const Tensor out = orc.diffusion_roundtrip(x, 5, 25, 0);
  double norm = 0.0;
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) norm += std::exp(-(dx * dx + dy * dy) / 2.0);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t xx = 0; xx < 16; ++xx) {
      const long dy = long(y) - 8, dx = long(xx) - 8;
      const double blur =
          (std::abs(dy) <= 2 && std::abs(dx) <= 2) ? std::exp(-(dx * dx + dy * dy) / 2.0) / norm : 0.0;
      const double expected = x(y, xx) + 1.5 * (x(y, xx) - blur);
      EXPECT_NEAR(out(y, xx), expected, 1e-12) << y << "," << xx;
    }
  }
}

TEST(Surrogate, RoundtripValidatesSteps) {
  SurrogateOracle orc;
  const Tensor x(16, 16, 3, 0.5);
  EXPECT_THROW(orc.diffusion_roundtrip(x, 0, 25, 0), InvalidConfig);
  EXPECT_THROW(orc.diffusion_roundtrip(x, 26, 25, 0), InvalidConfig);
}

TEST(Surrogate, DistanceMatchesDoubleLoop) {
  Rng rng(5);
  SurrogateOracle orc;
  const Tensor a = rng.image(17, 13, 3), b = rng.image(17, 13, 3);
  const Tensor d = orc.spatial_distance(a, b);
  ASSERT_EQ(d.channels(), 1u);
  for (long y = 0; y < 17; ++y) {
    for (long x = 0; x < 13; ++x) {
      double acc = 0.0;
      for (long dy = -3; dy <= 3; ++dy)
        for (long dx = -3; dx <= 3; ++dx) {
          const long yy = std::clamp(y + dy, 0L, 16L), xx = std::clamp(x + dx, 0L, 12L);
          double m = 0.0;
          for (std::size_t c = 0; c < 3; ++c) m += std::pow(a(yy, xx, c) - b(yy, xx, c), 2);
          acc += m / 3.0;
        }
      EXPECT_NEAR(d(y, x), acc / 49.0, 1e-6);
    }
  }
}

TEST(Surrogate, DistanceIsSymmetricNonNegativeAndZeroOnSelf) {
  Rng rng(6);
  SurrogateOracle orc;
  const Tensor a = rng.image(16, 16, 3), b = rng.image(16, 16, 3);
  const Tensor ab = orc.spatial_distance(a, b), ba = orc.spatial_distance(b, a);
  EXPECT_EQ(max_abs_diff(ab, ba), 0.0);
  for (double v : ab.values()) EXPECT_GE(v, 0.0);
  EXPECT_EQ(max_abs(orc.spatial_distance(a, a)), 0.0);
}

TEST(Surrogate, MissingCapabilitiesAreReported) {
  SurrogateOptions opt;
  opt.capabilities = {};
  SurrogateOracle orc(opt);
  const Tensor x(16, 16, 3, 0.5);
  LspSpec s;
  s.target = x;
  EXPECT_THROW(orc.eval_lsp(x, s, 0), UnsupportedOperation);
  EXPECT_THROW(orc.diffusion_roundtrip(x, 5, 25, 0), UnsupportedOperation);
  EXPECT_THROW(orc.spatial_distance(x, x), UnsupportedOperation);
  EXPECT_THROW(orc.clip_alignment(x, kNoiseFreePrompt), UnsupportedOperation);
  EXPECT_THROW(orc.masked_lpips(x, x, Tensor(16, 16, 1, 1.0)), UnsupportedOperation);
}

TEST(Surrogate, AlignmentUsesUnitImageEmbedding) {
  Rng rng(7);
  SurrogateOracle orc;
  const auto e = orc.image_embedding(rng.image(16, 16, 3));
  double n = 0.0;
  for (double v : e) n += v * v;
  EXPECT_NEAR(n, 1.0, 1e-12);
  EXPECT_EQ(orc.text_embedding(kNoiseFreePrompt), orc.text_embedding("Noise-free image"));
  EXPECT_NE(orc.text_embedding(kNoiseFreePrompt), orc.text_embedding("something else"));
  EXPECT_THROW(orc.image_embedding(Tensor(16, 16, 3, 0.0)), OracleError);
}

TEST(Surrogate, CapabilitySetOperations) {
  Capabilities c{Capability::kLspGrad, Capability::kClipEmbed};
  EXPECT_TRUE(c.has(Capability::kLspGrad));
  EXPECT_FALSE(c.has(Capability::kSpatialDistance));
  c.remove(Capability::kLspGrad);
  EXPECT_FALSE(c.has(Capability::kLspGrad));
  EXPECT_TRUE(c.has(Capability::kClipEmbed));
}

}  // namespace
}  // namespace impasto::oracle
