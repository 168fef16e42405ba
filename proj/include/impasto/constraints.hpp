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

// The perceptual constraint bank and the protection objective.
//
// Sign convention: total_loss() returns an objective to be *ascended*,
//
//   J = L_SP - w_pen * softmax_i |S_i d_i|
//         - lambda_L * L_lpips - lambda_LP * L_lowpass - lambda_C * L_clip
//
// so signed-gradient ascent on J raises the style-protection loss while
// pulling every imperceptibility term down. d = x_hat - x and S is the
// sensitivity map (1 = most visible).

#ifndef IMPASTO_CONSTRAINTS_HPP_
#define IMPASTO_CONSTRAINTS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "impasto/error.hpp"
#include "impasto/oracle.hpp"
#include "impasto/perceptual.hpp"
#include "impasto/tensor.hpp"
#include "impasto/wavelet.hpp"

namespace impasto::constraints {

struct ConstraintWeights {
  double lambda_lpips = 5.0;
  double lambda_lowpass = 10.0;
  double lambda_clip = 0.1;
  double unet_scale = 0.05;  // applied whenever lambda_SD > 0

  void validate() const {
    if (!(lambda_lpips >= 0.0) || !(lambda_lowpass >= 0.0) ||
        !(lambda_clip >= 0.0) || !(unet_scale >= 0.0)) {
      throw InvalidConfig("constraint weights must be non-negative");
    }
  }

  ConstraintWeights effective(double lambda_sd) const {
    if (!(lambda_sd > 0.0)) return *this;
    return {lambda_lpips * unet_scale, lambda_lowpass * unet_scale,
            lambda_clip * unet_scale, unet_scale};
  }

  friend bool operator==(const ConstraintWeights&, const ConstraintWeights&) = default;
};

inline void require_mask(const Tensor& mask, const Tensor& like) {
  if (mask.channels() != 1 || !mask.same_extent(like)) {
    throw InvalidInput("mask " + mask.shape_string() + " does not match " +
                       like.shape_string());
  }
}

// (1/d) sum_p S_p ||LP(x)_p - LP(x_hat)_p||^2 over the d pixels; gradient
// with respect to x_hat.
inline LossGrad masked_lowpass_loss(const Tensor& x, const Tensor& x_hat,
                                    const Tensor& mask,
                                    const wavelet::WaveletFilterPair& f =
                                        wavelet::haar()) {
  x.require_same_shape(x_hat);
  require_mask(mask, x);
  const Tensor diff = wavelet::dwt_lowpass(x_hat, f) - wavelet::dwt_lowpass(x, f);
  const double inv_d = 1.0 / static_cast<double>(x.pixels());
  const std::size_t c = x.channels();
  LossGrad out;
  Tensor weighted(diff.height(), diff.width(), c);
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    for (std::size_t k = 0; k < c; ++k) {
      const double v = diff[p * c + k];
      out.loss += inv_d * mask[p] * v * v;
      weighted[p * c + k] = 2.0 * inv_d * mask[p] * v;
    }
  }
  out.grad = wavelet::dwt_lowpass_adjoint(weighted, f);
  return out;
}

// -cos(CLIP_I(x_hat), CLIP_T("Noise-free image")).
inline LossGrad clip_alignment_loss(const Tensor& x_hat,
                                    oracle::GuidanceOracle& oracle) {
  LossGrad r = oracle.clip_alignment(x_hat, oracle::kNoiseFreePrompt);
  if (!std::isfinite(r.loss) || r.loss < -1.0 - 1e-9 || r.loss > 1.0 + 1e-9) {
    throw OracleError("alignment loss outside [-1,1]: " + std::to_string(r.loss));
  }
  if (!r.grad.same_shape(x_hat) || !all_finite(r.grad)) {
    throw OracleError("alignment gradient is malformed");
  }
  return r;
}

inline constexpr double kPenaltyTemperature = 0.01;

// Soft L-infinity norm of S . d. The smooth form is a mean-normalized
// log-sum-exp, tau * log((1/n) sum_i exp(|S_i d_i| / tau)), which is zero at
// d = 0 and within tau*log(n) below the true maximum. `exact` uses the
// maximum itself with the subgradient at the first arg-max.
inline LossGrad soft_linf_penalty(const Tensor& delta, const Tensor& mask,
                                  double temperature = kPenaltyTemperature,
                                  bool exact = false) {
  require_mask(mask, delta);
  const std::size_t c = delta.channels();
  const std::size_t n = delta.size();
  LossGrad out;
  out.grad = Tensor(delta.height(), delta.width(), c);
  if (n == 0) return out;
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = std::abs(mask[i / c] * delta[i]);
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  const auto argmax = static_cast<std::size_t>(
      std::max_element(a.begin(), a.end()) - a.begin());
  const double amax = a[argmax];
  if (exact) {
    out.loss = amax;
    if (amax > 0.0) out.grad[argmax] = mask[argmax / c] * sign(delta[argmax]);
    return out;
  }
  if (!(temperature > 0.0)) throw InvalidConfig("penalty temperature must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp((a[i] - amax) / temperature);
  out.loss = amax + temperature * std::log(sum / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::exp((a[i] - amax) / temperature) / sum;
    out.grad[i] = p * mask[i / c] * sign(delta[i]);
  }
  return out;
}

struct TotalLossOptions {
  ConstraintWeights weights;
  double penalty_weight = 1.0;
  double penalty_temperature = kPenaltyTemperature;
  bool exact_penalty = false;
  wavelet::WaveletFilterPair wavelet = wavelet::haar();
};

struct TotalLoss {
  double objective = 0.0;  // J, ascended by the protection loop
  double lsp = 0.0;
  double encoder_loss = 0.0;
  double diffusion_loss = 0.0;
  double penalty = 0.0;
  double lpips = 0.0;
  double lowpass = 0.0;
  double clip = 0.0;
  ConstraintWeights effective;
  Tensor grad;  // dJ / dx_hat
};

// Terms with zero weight are skipped, so an oracle lacking a capability is
// only consulted for what it is asked to provide.
inline TotalLoss total_loss(const Tensor& x, const Tensor& x_hat,
                            const Tensor& sensitivity, const oracle::LspSpec& spec,
                            const TotalLossOptions& opt,
                            oracle::GuidanceOracle& oracle, std::uint64_t seed) {
  x.require_same_shape(x_hat);
  require_mask(sensitivity, x);
  opt.weights.validate();
  TotalLoss out;
  out.effective = opt.weights.effective(spec.lambda_sd);

  oracle::LspValue lsp = oracle.eval_lsp(x_hat, spec, seed);
  if (!lsp.grad.same_shape(x_hat) || !all_finite(lsp.grad) || !std::isfinite(lsp.loss)) {
    throw OracleError("oracle returned a malformed L_SP gradient");
  }
  out.lsp = lsp.loss;
  out.encoder_loss = lsp.encoder_loss;
  out.diffusion_loss = lsp.diffusion_loss;
  out.objective = lsp.loss;
  out.grad = std::move(lsp.grad);

  auto subtract = [&](double w, const LossGrad& term) {
    out.objective -= w * term.loss;
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] -= w * term.grad[i];
  };

  if (opt.penalty_weight != 0.0) {
    const LossGrad pen = soft_linf_penalty(x_hat - x, sensitivity,
                                           opt.penalty_temperature, opt.exact_penalty);
    out.penalty = pen.loss;
    subtract(opt.penalty_weight, pen);
  }
  if (out.effective.lambda_lpips != 0.0) {
    LossGrad l = oracle.masked_lpips(x, x_hat, sensitivity);
    if (!l.grad.same_shape(x_hat) || !all_finite(l.grad)) {
      throw OracleError("masked feature loss gradient is malformed");
    }
    out.lpips = l.loss;
    subtract(out.effective.lambda_lpips, l);
  }
  if (out.effective.lambda_lowpass != 0.0) {
    const LossGrad l = masked_lowpass_loss(x, x_hat, sensitivity, opt.wavelet);
    out.lowpass = l.loss;
    subtract(out.effective.lambda_lowpass, l);
  }
  if (out.effective.lambda_clip != 0.0) {
    const LossGrad l = clip_alignment_loss(x_hat, oracle);
    out.clip = l.loss;
    subtract(out.effective.lambda_clip, l);
  }
  return out;
}

}  // namespace impasto::constraints

#endif  // IMPASTO_CONSTRAINTS_HPP_
