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

// Deterministic closed-form oracle for desk-scale runs and tests.
//
//   encoder term     L_E  = ||A vec(x_hat) - A vec(y)||^2
//   diffusion term   L_SD = ||C vec(x_hat)||^2
//   roundtrip        DP(x) = x + kappa * (x - gauss5x5(x))
//   distance         box7x7(channel_mean((a - b)^2))
//   image embedding  P vec(x) / ||P vec(x)||
//
// A, C and P are fixed 64 x d projections regenerated from seed 0x1A57.
// None of these is a diffusion model; they only give the protection loop a
// smooth, nontrivial landscape with exact gradients.

#ifndef IMPASTO_SURROGATE_ORACLE_HPP_
#define IMPASTO_SURROGATE_ORACLE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "impasto/detail/random.hpp"
#include "impasto/oracle.hpp"
#include "impasto/perceptual.hpp"
#include "impasto/tensor.hpp"

namespace impasto::oracle {

inline constexpr std::uint64_t kSurrogateSeed = 0x1A57;
inline constexpr std::size_t kProjectionRows = 64;

// A rows x cols matrix with entries uniform in [-sqrt(3/cols), sqrt(3/cols)],
// so each row has unit expected squared norm. Small matrices are materialized;
// larger ones are regenerated entry by entry.
class SeededProjection {
 public:
  static constexpr std::size_t kMaterializeLimit = 1u << 20;  // entries

  SeededProjection(std::uint64_t seed, std::size_t rows, std::size_t cols)
      : seed_(seed), rows_(rows), cols_(cols),
        scale_(std::sqrt(3.0 / static_cast<double>(cols))) {
    if (rows * cols <= kMaterializeLimit) {
      dense_.resize(rows * cols);
      for (std::size_t i = 0; i < dense_.size(); ++i) dense_[i] = generate(i);
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double at(std::size_t r, std::size_t c) const {
    const std::size_t i = r * cols_ + c;
    return dense_.empty() ? generate(i) : dense_[i];
  }

  std::vector<double> apply(std::span<const double> v) const {
    std::vector<double> out(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) acc += at(r, c) * v[c];
      out[r] = acc;
    }
    return out;
  }

  std::vector<double> apply_transpose(std::span<const double> u) const {
    std::vector<double> out(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) out[c] += at(r, c) * u[r];
    }
    return out;
  }

 private:
  double generate(std::size_t i) const {
    return scale_ * detail::uniform_pm1(seed_, i);
  }

  std::uint64_t seed_;
  std::size_t rows_, cols_;
  double scale_;
  std::vector<double> dense_;
};

struct SurrogateOptions {
  std::uint64_t seed = kSurrogateSeed;
  double kappa = 1.5;          // roundtrip high-pass amplification
  double blur_sigma = 1.0;     // 5x5 Gaussian of the roundtrip
  std::size_t distance_radius = 3;  // 7x7 box smoothing of the distance map
  Capabilities capabilities{Capability::kLspGrad, Capability::kLpipsFeatures,
                            Capability::kClipEmbed, Capability::kDiffusionRoundtrip,
                            Capability::kSpatialDistance};
};

// Normalized 5x5 Gaussian, row-major.
inline std::array<double, 25> gaussian5(double sigma) {
  std::array<double, 25> k{};
  double sum = 0.0;
  for (int y = -2; y <= 2; ++y) {
    for (int x = -2; x <= 2; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>((y + 2) * 5 + x + 2)] = v;
      sum += v;
    }
  }
  for (double& v : k) v /= sum;
  return k;
}

class SurrogateOracle final : public GuidanceOracle {
 public:
  explicit SurrogateOracle(SurrogateOptions opt = {})
      : opt_(opt), features_(opt.seed) {}

  std::string name() const override { return "surrogate"; }
  Capabilities capabilities() const override { return opt_.capabilities; }

  LspValue eval_lsp(const Tensor& x_hat, const LspSpec& spec,
                    std::uint64_t /*seed*/) override {
    require(Capability::kLspGrad, "eval_lsp");
    spec.validate(x_hat);
    LspValue out;
    out.grad = Tensor(x_hat.height(), x_hat.width(), x_hat.channels());
    if (spec.lambda_e > 0.0) {
      const SeededProjection& a = projection('A', x_hat.size());
      std::vector<double> diff(x_hat.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = x_hat[i] - spec.target[i];
      const std::vector<double> r = a.apply(diff);
      for (double v : r) out.encoder_loss += v * v;
      const std::vector<double> g = a.apply_transpose(r);
      for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] -= spec.lambda_e * 2.0 * g[i];
    }
    if (spec.lambda_sd > 0.0) {
      const SeededProjection& c = projection('C', x_hat.size());
      const std::vector<double> r = c.apply(x_hat.values());
      for (double v : r) out.diffusion_loss += v * v;
      const std::vector<double> g = c.apply_transpose(r);
      for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += spec.lambda_sd * 2.0 * g[i];
    }
    out.loss = -spec.lambda_e * out.encoder_loss + spec.lambda_sd * out.diffusion_loss;
    return out;
  }

  Tensor diffusion_roundtrip(const Tensor& x, int t, int total,
                             std::uint64_t /*seed*/) override {
    require(Capability::kDiffusionRoundtrip, "diffusion_roundtrip");
    if (t <= 0 || t > total) {
      throw InvalidConfig("roundtrip needs 0 < t <= T, got t=" + std::to_string(t) +
                          " T=" + std::to_string(total));
    }
    const auto k = gaussian5(opt_.blur_sigma);
    const Tensor blurred = correlate_replicate(x, k, 5);
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = x[i] + opt_.kappa * (x[i] - blurred[i]);
    }
    return out;
  }

  Tensor spatial_distance(const Tensor& a, const Tensor& b) override {
    require(Capability::kSpatialDistance, "spatial_distance");
    a.require_same_shape(b);
    Tensor sq = a;
    for (std::size_t i = 0; i < sq.size(); ++i) {
      const double d = a[i] - b[i];
      sq[i] = d * d;
    }
    return box_mean(channel_mean(sq), opt_.distance_radius);
  }

  std::vector<double> image_embedding(const Tensor& x) override {
    require(Capability::kClipEmbed, "image_embedding");
    std::vector<double> u = projection('P', x.size()).apply(x.values());
    const double n = norm(u);
    if (!(n > 0.0)) throw OracleError("zero-norm image embedding");
    for (double& v : u) v /= n;
    return u;
  }

  Tensor image_embedding_vjp(const Tensor& x,
                             const std::vector<double>& cot) override {
    require(Capability::kClipEmbed, "image_embedding_vjp");
    const SeededProjection& p = projection('P', x.size());
    const std::vector<double> u = p.apply(x.values());
    const double n = norm(u);
    if (!(n > 0.0)) throw OracleError("zero-norm image embedding");
    // d(u/|u|)/du = (I - e e^T)/|u|
    double eg = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) eg += u[i] / n * cot[i];
    std::vector<double> gu(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) gu[i] = (cot[i] - u[i] / n * eg) / n;
    Tensor out(x.height(), x.width(), x.channels());
    const std::vector<double> g = p.apply_transpose(gu);
    std::copy(g.begin(), g.end(), out.values().begin());
    return out;
  }

  std::vector<double> text_embedding(std::string_view prompt) override {
    require(Capability::kClipEmbed, "text_embedding");
    std::vector<double> t(kProjectionRows);
    const std::uint64_t s = detail::mix_seed(opt_.seed, detail::hash_string(prompt));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = detail::uniform_pm1(s, i);
    return t;
  }

  const FeatureExtractor* feature_extractor() const override { return &features_; }

  const SeededProjection& projection(char which, std::size_t cols) {
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = cache_[{which, cols}];
    if (!slot) {
      slot = std::make_unique<SeededProjection>(
          detail::mix_seed(opt_.seed, static_cast<std::uint64_t>(which)),
          kProjectionRows, cols);
    }
    return *slot;
  }

 private:
  void require(Capability c, const char* op) const {
    if (!opt_.capabilities.has(c)) {
      throw UnsupportedOperation(name() + ": " + op);
    }
  }

  static double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }

  SurrogateOptions opt_;
  SurrogateFeatureExtractor features_;
  std::mutex mu_;
  std::map<std::pair<char, std::size_t>, std::unique_ptr<SeededProjection>> cache_;
};

}  // namespace impasto::oracle

#endif  // IMPASTO_SURROGATE_ORACLE_HPP_
