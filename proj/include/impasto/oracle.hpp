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

// The guidance-oracle contract.
//
// Every neural computation the protection loop needs sits behind this
// interface: the style-protection loss and its input gradient, a partial
// diffusion roundtrip, a spatial perceptual distance, the image-text
// alignment loss and the masked feature loss. SurrogateOracle answers these
// with closed-form stand-ins; RemoteOracle forwards them to a worker process.

#ifndef IMPASTO_ORACLE_HPP_
#define IMPASTO_ORACLE_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "impasto/error.hpp"
#include "impasto/perceptual.hpp"
#include "impasto/tensor.hpp"

namespace impasto::oracle {

enum class Capability : unsigned {
  kLspGrad = 1u << 0,
  kLpipsFeatures = 1u << 1,
  kClipEmbed = 1u << 2,
  kDiffusionRoundtrip = 1u << 3,
  kSpatialDistance = 1u << 4,
};

class Capabilities {
 public:
  constexpr Capabilities() = default;
  constexpr Capabilities(std::initializer_list<Capability> caps) {
    for (Capability c : caps) bits_ |= static_cast<unsigned>(c);
  }
  constexpr bool has(Capability c) const {
    return (bits_ & static_cast<unsigned>(c)) != 0;
  }
  constexpr void remove(Capability c) { bits_ &= ~static_cast<unsigned>(c); }

 private:
  unsigned bits_ = 0;
};

enum class TimestepPolicy {
  kUniformPerCall,  // fresh uniform draw of t from the call seed
  kFixed,
};

// Mixing of the encoder and diffusion terms of the style-protection loss:
//   L_SP = -lambda_e * ||E(x_hat) - E(y)||^2 + lambda_sd * L_SD(E(x_hat))
struct LspSpec {
  double lambda_e = 1.0;
  double lambda_sd = 0.0;
  Tensor target;  // y; required when lambda_e > 0
  TimestepPolicy timestep_policy = TimestepPolicy::kUniformPerCall;
  int fixed_timestep = 500;

  void validate(const Tensor& like) const {
    if (!(lambda_e >= 0.0) || !(lambda_sd >= 0.0)) {
      throw InvalidConfig("lambda_E and lambda_SD must be non-negative");
    }
    if (lambda_e == 0.0 && lambda_sd == 0.0) {
      throw InvalidConfig("lambda_E and lambda_SD cannot both be zero");
    }
    if (lambda_e > 0.0 && !target.same_shape(like)) {
      throw InvalidInput("target " + target.shape_string() +
                         " does not match image " + like.shape_string());
    }
  }
};

struct LspValue {
  double loss = 0.0;           // L_SP
  double encoder_loss = 0.0;   // L_E (0 when lambda_e == 0)
  double diffusion_loss = 0.0; // L_SD (0 when lambda_sd == 0)
  Tensor grad;                 // dL_SP / dx_hat
};

inline constexpr int kDefaultRoundtripSteps = 5;
inline constexpr int kDefaultTotalSteps = 25;
inline constexpr std::string_view kNoiseFreePrompt = "Noise-free image";

// -cos(a, b) and its gradient with respect to a.
inline std::pair<double, std::vector<double>> negative_cosine(
    const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw OracleError("embedding sizes differ");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (!(aa > 0.0) || !(bb > 0.0)) throw OracleError("zero-norm embedding");
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const double cos = ab / (na * nb);
  std::vector<double> g(a.size());
  // d cos / da = b/(|a||b|) - cos * a/|a|^2
  for (std::size_t i = 0; i < a.size(); ++i) {
    g[i] = -(b[i] / (na * nb) - cos * a[i] / aa);
  }
  return {-cos, std::move(g)};
}

class GuidanceOracle {
 public:
  virtual ~GuidanceOracle() = default;

  virtual std::string name() const = 0;
  virtual Capabilities capabilities() const = 0;

  // Style-protection loss and its gradient at x_hat. `seed` drives every
  // stochastic draw (timestep, noise) so equal inputs give equal outputs.
  virtual LspValue eval_lsp(const Tensor& x_hat, const LspSpec& spec,
                            std::uint64_t seed) = 0;

  // Encode, t forward noise steps out of `total`, t reverse steps, decode.
  virtual Tensor diffusion_roundtrip(const Tensor& /*x*/, int /*t*/,
                                     int /*total*/, std::uint64_t /*seed*/) {
    throw UnsupportedOperation(name() + ": diffusion_roundtrip");
  }

  // Non-negative H x W x 1 perceptual distance map.
  virtual Tensor spatial_distance(const Tensor& /*a*/, const Tensor& /*b*/) {
    throw UnsupportedOperation(name() + ": spatial_distance");
  }

  // Local embedding route for the alignment loss.
  virtual std::vector<double> image_embedding(const Tensor& /*x*/) {
    throw UnsupportedOperation(name() + ": image_embedding");
  }
  virtual Tensor image_embedding_vjp(const Tensor& /*x*/,
                                     const std::vector<double>& /*cotangent*/) {
    throw UnsupportedOperation(name() + ": image_embedding_vjp");
  }
  virtual std::vector<double> text_embedding(std::string_view /*prompt*/) {
    throw UnsupportedOperation(name() + ": text_embedding");
  }

  // -cos(image_embedding(x), text_embedding(prompt)) and its gradient.
  virtual LossGrad clip_alignment(const Tensor& x, std::string_view prompt) {
    if (!capabilities().has(Capability::kClipEmbed)) {
      throw UnsupportedOperation(name() + ": clip_alignment");
    }
    const std::vector<double> e = image_embedding(x);
    const std::vector<double> t = text_embedding(prompt);
    auto [loss, g] = negative_cosine(e, t);
    return {loss, image_embedding_vjp(x, g)};
  }

  virtual const FeatureExtractor* feature_extractor() const { return nullptr; }

  // Masked feature distance between x and x_hat, gradient w.r.t. x_hat.
  virtual LossGrad masked_lpips(const Tensor& x, const Tensor& x_hat,
                                const Tensor& mask) {
    const FeatureExtractor* f = feature_extractor();
    if (!f || !capabilities().has(Capability::kLpipsFeatures)) {
      throw UnsupportedOperation(name() + ": masked_lpips");
    }
    return masked_lpips_loss(x, x_hat, mask, *f);
  }
};

}  // namespace impasto::oracle

#endif  // IMPASTO_ORACLE_HPP_
