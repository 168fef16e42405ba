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

// Fusion of the K JND strength maps into one perceptual map, and
// instance-wise refinement of the fusion logits.
//
// The fused map is M(w) = sum_k softmax(w)_k * M^k. Refinement takes one
// gradient step on
//
//   L_M(w) = A * (L_SP(x + M' . d) - L_SP(x + M(w) . d))^2 + ||M(w) . d||_2
//
// where M' is the plain average fixed at initialization, d a perturbation,
// "." the per-pixel product broadcast over channels, and A a gain that
// brings the consistency term to the scale of the norm term.

#ifndef IMPASTO_FUSION_HPP_
#define IMPASTO_FUSION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "impasto/error.hpp"
#include "impasto/jnd.hpp"
#include "impasto/oracle.hpp"
#include "impasto/tensor.hpp"

namespace impasto::fusion {

inline constexpr double kConsistencyGain = 5e7;
inline constexpr double kDefaultOmegaStep = 1e-2;

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

struct FusionWeights {
  std::vector<double> omega;

  static FusionWeights uniform(std::size_t k) {
    return {std::vector<double>(k, 1.0 / static_cast<double>(k))};
  }
  std::vector<double> weights() const { return softmax(omega); }
  std::size_t size() const { return omega.size(); }
};

// Convex combination of single-channel maps with the given weights.
inline Tensor combine(std::span<const Tensor> maps, std::span<const double> w) {
  if (maps.empty()) throw InvalidInput("fusion needs at least one map");
  if (w.size() != maps.size()) {
    throw InvalidInput("fusion weight count does not match map count");
  }
  Tensor out(maps[0].height(), maps[0].width(), 1);
  for (std::size_t k = 0; k < maps.size(); ++k) {
    if (maps[k].channels() != 1 || !maps[k].same_extent(maps[0])) {
      throw InvalidInput("fusion map " + std::to_string(k) + " has shape " +
                         maps[k].shape_string() + ", expected " +
                         maps[0].shape_string());
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < maps.size(); ++k) acc += w[k] * maps[k][i];
    out[i] = acc;
  }
  return out;
}

// softmax(weights) fusion; nullptr means the plain 1/K average.
inline Tensor fuse_maps(std::span<const Tensor> maps,
                        const FusionWeights* weights = nullptr) {
  if (maps.empty()) throw InvalidInput("fusion needs at least one map");
  if (!weights) {
    std::vector<double> w(maps.size(), 1.0 / static_cast<double>(maps.size()));
    return combine(maps, w);
  }
  if (weights->size() != maps.size()) {
    throw InvalidInput("omega has " + std::to_string(weights->size()) +
                       " entries for " + std::to_string(maps.size()) + " maps");
  }
  return combine(maps, weights->weights());
}

inline std::vector<Tensor> strength_values(const std::vector<jnd::StrengthMap>& m) {
  std::vector<Tensor> out;
  out.reserve(m.size());
  for (const auto& s : m) out.push_back(s.values);
  return out;
}

struct FusionState {
  std::vector<Tensor> maps;  // K strength maps
  Tensor initial_map;        // M', fixed
  FusionWeights omega;
  double step_size = kDefaultOmegaStep;
  double consistency_gain = kConsistencyGain;

  Tensor current_map() const { return fuse_maps(maps, &omega); }
};

inline FusionState init_state(std::vector<Tensor> maps,
                              double step_size = kDefaultOmegaStep) {
  if (maps.empty()) throw InvalidInput("fusion needs at least one map");
  FusionState s;
  s.initial_map = fuse_maps(maps);
  s.omega = FusionWeights::uniform(maps.size());
  s.maps = std::move(maps);
  s.step_size = step_size;
  return s;
}

struct IwrObjective {
  double loss = 0.0;
  double consistency = 0.0;  // A * (l' - l)^2
  double norm_term = 0.0;    // ||M(w) . d||_2
  std::vector<double> grad_omega;
};

// L_M and its gradient with respect to `omega` (not necessarily the
// state's own logits, so finite differences can probe it).
inline IwrObjective iwr_objective(const FusionState& state,
                                  std::span<const double> omega,
                                  const Tensor& x, const Tensor& delta,
                                  const oracle::LspSpec& spec,
                                  oracle::GuidanceOracle& oracle,
                                  std::uint64_t seed) {
  x.require_same_shape(delta);
  const std::size_t kmaps = state.maps.size();
  if (omega.size() != kmaps) throw InvalidInput("omega size mismatch");
  const std::vector<double> s = softmax(omega);
  const Tensor fused = combine(state.maps, s);

  const Tensor x_ref = x + modulate(delta, state.initial_map);
  const Tensor x_cur = x + modulate(delta, fused);
  const double l_ref = oracle.eval_lsp(x_ref, spec, seed).loss;
  const oracle::LspValue cur = oracle.eval_lsp(x_cur, spec, seed);
  if (!all_finite(cur.grad)) throw OracleError("non-finite L_SP gradient");

  const double a = state.consistency_gain;
  const double gap = l_ref - cur.loss;

  const Tensor md = modulate(delta, fused);
  double norm_sq = 0.0;
  for (double v : md.values()) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);

  IwrObjective out;
  out.consistency = a * gap * gap;
  out.norm_term = norm;
  out.loss = out.consistency + out.norm_term;

  // dL/ds_k, then through the softmax Jacobian.
  const std::size_t c = x.channels();
  std::vector<double> grad_s(kmaps, 0.0);
  for (std::size_t k = 0; k < kmaps; ++k) {
    const Tensor& mk = state.maps[k];
    double dl = 0.0;     // sum_i g_i M^k_i d_i
    double dnorm = 0.0;  // sum_i M(w)_i d_i^2 M^k_i
    for (std::size_t p = 0; p < x.pixels(); ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t i = p * c + ch;
        dl += cur.grad[i] * mk[p] * delta[i];
        dnorm += fused[p] * delta[i] * delta[i] * mk[p];
      }
    }
    grad_s[k] = -2.0 * a * gap * dl + (norm > 0.0 ? dnorm / norm : 0.0);
  }
  double mean = 0.0;
  for (std::size_t k = 0; k < kmaps; ++k) mean += s[k] * grad_s[k];
  out.grad_omega.resize(kmaps);
  for (std::size_t j = 0; j < kmaps; ++j) out.grad_omega[j] = s[j] * (grad_s[j] - mean);
  return out;
}

// One plain gradient-descent step on omega.
inline FusionState iwr_update(FusionState state, const Tensor& x,
                              const Tensor& delta, const oracle::LspSpec& spec,
                              oracle::GuidanceOracle& oracle,
                              std::uint64_t seed) {
  const IwrObjective obj =
      iwr_objective(state, state.omega.omega, x, delta, spec, oracle, seed);
  for (std::size_t k = 0; k < state.omega.size(); ++k) {
    state.omega.omega[k] -= state.step_size * obj.grad_omega[k];
  }
  return state;
}

// One diagnostics line: "<step> omega <w...> weights <softmax(w)...>".
inline void log_omega(std::ostream& os, std::size_t step, const FusionWeights& w) {
  const auto prec = os.precision(std::numeric_limits<double>::max_digits10);
  os << step << " omega";
  for (double v : w.omega) os << ' ' << v;
  os << " weights";
  for (double v : w.weights()) os << ' ' << v;
  os << '\n';
  os.precision(prec);
}

}  // namespace impasto::fusion

#endif  // IMPASTO_FUSION_HPP_
