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

// The protection loop: signed-gradient PGD under an L-infinity budget, with
// the step modulated per pixel by the fused perceptual map M(w) and the
// difficulty map M_D. Every `interval` steps the fusion logits take one
// refinement step and M_D is re-estimated from a diffusion roundtrip.
//
//   d_i = alpha * sgn(dJ/dx_hat)               J from constraints::total_loss
//   x_i = clip(x_{i-1} + d_i . M(w) . M_D)     clip onto the eta-ball and [0,1]
//
// The protected image is x_N and the perturbation x_N - x.

#ifndef IMPASTO_PROTECT_HPP_
#define IMPASTO_PROTECT_HPP_

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "impasto/constraints.hpp"
#include "impasto/detail/random.hpp"
#include "impasto/error.hpp"
#include "impasto/fusion.hpp"
#include "impasto/jnd.hpp"
#include "impasto/oracle.hpp"
#include "impasto/tensor.hpp"
#include "impasto/wavelet.hpp"

namespace impasto::protect {

enum class Preset { kPhotoguard, kAdvdm, kMist, kAntiDb, kDiffProtect };

inline constexpr std::array<Preset, 5> kAllPresets = {
    Preset::kPhotoguard, Preset::kAdvdm, Preset::kMist, Preset::kAntiDb,
    Preset::kDiffProtect};

inline std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::kPhotoguard: return "photoguard";
    case Preset::kAdvdm: return "advdm";
    case Preset::kMist: return "mist";
    case Preset::kAntiDb: return "anti-db";
    case Preset::kDiffProtect: return "diff-protect";
  }
  return "?";
}

inline Preset parse_preset(std::string_view s) {
  for (Preset p : kAllPresets) {
    if (preset_name(p) == s) return p;
  }
  throw InvalidConfig("unknown preset '" + std::string(s) + "'");
}

// (lambda_E, lambda_SD). The encoder-only and diffusion-only baselines take
// one term each; the combined ones take both.
inline std::pair<double, double> preset_lambdas(Preset p) {
  switch (p) {
    case Preset::kPhotoguard: return {1.0, 0.0};
    case Preset::kAdvdm: return {0.0, 1.0};
    case Preset::kMist:
    case Preset::kAntiDb:
    case Preset::kDiffProtect: return {1.0, 1.0};
  }
  return {1.0, 0.0};
}

struct ProtectionConfig {
  Preset preset = Preset::kPhotoguard;
  double eta = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int steps = 100;    // N
  int interval = 4;   // P
  constraints::ConstraintWeights weights;
  double penalty_weight = 1.0;
  double penalty_temperature = constraints::kPenaltyTemperature;
  bool exact_penalty = false;
  double m_lo = 0.5;  // floor of M_D
  int dap_t = oracle::kDefaultRoundtripSteps;
  int dap_total = oracle::kDefaultTotalSteps;
  double omega_step = fusion::kDefaultOmegaStep;
  double consistency_gain = fusion::kConsistencyGain;
  double pixels_per_degree = jnd::kDefaultPixelsPerDegree;
  std::string wavelet = "haar";
  oracle::TimestepPolicy timestep_policy = oracle::TimestepPolicy::kUniformPerCall;
  int fixed_timestep = 500;
  bool use_maps = true;  // modulate by M(w); off means M = 1
  bool use_iwr = true;
  bool use_dap = true;
  bool use_bank = true;  // lpips / low-pass / alignment terms
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& m) { throw InvalidConfig(m); };
    if (!(eta > 0.0) || !std::isfinite(eta)) bad("eta must be positive");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) bad("alpha must be non-negative");
    if (steps < 0) bad("steps must be non-negative");
    if (interval < 1) bad("interval must be at least 1");
    if (!(m_lo >= 0.0 && m_lo <= 1.0)) bad("m_lo must lie in [0,1]");
    if (dap_t <= 0 || dap_t > dap_total) bad("DAP needs 0 < t <= T");
    if (!(penalty_weight >= 0.0)) bad("penalty weight must be non-negative");
    if (!(penalty_temperature > 0.0)) bad("penalty temperature must be positive");
    if (!(omega_step >= 0.0)) bad("omega step must be non-negative");
    if (!(consistency_gain >= 0.0)) bad("consistency gain must be non-negative");
    if (!(pixels_per_degree > 0.0)) bad("pixels per degree must be positive");
    weights.validate();
    wavelet::filter_by_name(wavelet);
  }

  friend bool operator==(const ProtectionConfig&, const ProtectionConfig&) = default;
};

// Mid-gray image carrying a 16-pixel checkerboard at 0.2 / 0.8.
inline constexpr std::size_t kGridCell = 16;

inline Tensor make_grid_target(std::size_t h, std::size_t w, std::size_t c) {
  Tensor t(h, w, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = ((y / kGridCell + x / kGridCell) % 2 == 0) ? 0.2 : 0.8;
      for (std::size_t ch = 0; ch < c; ++ch) t(y, x, ch) = v;
    }
  }
  return t;
}

// Per-pixel clamp into [x - eta, x + eta] intersected with [0, 1].
inline Tensor project_linf(const Tensor& x, const Tensor& candidate, double eta) {
  x.require_same_shape(candidate);
  Tensor out = candidate;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double lo = std::max(x[i] - eta, 0.0);
    const double hi = std::min(x[i] + eta, 1.0);
    out[i] = std::clamp(candidate[i], lo, hi);
  }
  return out;
}

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline Tensor signed_step(const Tensor& grad, double alpha) {
  Tensor d(grad.height(), grad.width(), grad.channels());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = alpha * sgn(grad[i]);
  return d;
}

// x_i = clip(x_{i-1} + step . M . M_D).
inline Tensor apply_step(const Tensor& x, const Tensor& x_prev, const Tensor& step,
                         const Tensor& perceptual, const Tensor& difficulty, double eta) {
  x.require_same_shape(x_prev);
  x.require_same_shape(step);
  Tensor cand = x_prev;
  const std::size_t c = x.channels();
  for (std::size_t i = 0; i < cand.size(); ++i) {
    cand[i] = x_prev[i] + step[i] * perceptual[i / c] * difficulty[i / c];
  }
  return project_linf(x, cand, eta);
}

inline oracle::LspSpec make_spec(const ProtectionConfig& cfg, const Tensor& target) {
  const auto [le, lsd] = preset_lambdas(cfg.preset);
  oracle::LspSpec spec;
  spec.lambda_e = le;
  spec.lambda_sd = lsd;
  spec.target = target;
  spec.timestep_policy = cfg.timestep_policy;
  spec.fixed_timestep = cfg.fixed_timestep;
  return spec;
}

inline constraints::TotalLossOptions make_loss_options(const ProtectionConfig& cfg) {
  constraints::TotalLossOptions o;
  o.weights = cfg.weights;
  if (!cfg.use_bank) o.weights = {0.0, 0.0, 0.0, cfg.weights.unet_scale};
  o.penalty_weight = cfg.penalty_weight;
  o.penalty_temperature = cfg.penalty_temperature;
  o.exact_penalty = cfg.exact_penalty;
  o.wavelet = wavelet::filter_by_name(cfg.wavelet);
  return o;
}

using WarnFn = std::function<void(std::string_view)>;

// M_D = m_lo + (1 - m_lo) * minmax(distance(DP(x), DP(x_i))). A constant
// distance map, including the all-zero one at x_i = x, gives all ones. An
// oracle without the roundtrip or distance capability leaves M_D at ones.
inline Tensor dap_difficulty(const Tensor& x, const Tensor& x_i,
                             const ProtectionConfig& cfg, oracle::GuidanceOracle& oracle,
                             std::uint64_t seed, const WarnFn& warn = {}) {
  x.require_same_shape(x_i);
  Tensor ones(x.height(), x.width(), 1, 1.0);
  const auto caps = oracle.capabilities();
  if (!caps.has(oracle::Capability::kDiffusionRoundtrip) ||
      !caps.has(oracle::Capability::kSpatialDistance)) {
    if (warn) warn(oracle.name() + " lacks roundtrip/distance support; difficulty map disabled");
    return ones;
  }
  const Tensor a = oracle.diffusion_roundtrip(x, cfg.dap_t, cfg.dap_total, seed);
  const Tensor b = oracle.diffusion_roundtrip(x_i, cfg.dap_t, cfg.dap_total, seed);
  const Tensor dist = oracle.spatial_distance(a, b);
  if (dist.channels() != 1 || !dist.same_extent(x) || !all_finite(dist)) {
    throw OracleError("distance map is malformed");
  }
  const auto v = dist.values();
  if (std::all_of(v.begin(), v.end(), [&](double d) { return d == v.front(); })) {
    return ones;
  }
  const Tensor n = minmax_normalize(dist);
  Tensor out(x.height(), x.width(), 1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cfg.m_lo + (1.0 - cfg.m_lo) * n[i];
  return out;
}

struct TraceEntry {
  int step = 0;
  double lsp = 0.0;
  double encoder_loss = 0.0;
  double diffusion_loss = 0.0;
  double penalty = 0.0;
  double lpips = 0.0;
  double lowpass = 0.0;
  double clip = 0.0;
  double objective = 0.0;
  double linf = 0.0;  // max |x_i - x|
  bool iwr = false;   // refinement ran right after this step's update
  bool dap = false;   // likewise for the difficulty map
};

struct ProtectionResult {
  Tensor protected_image;
  Tensor delta;
  Tensor perceptual_map;  // M(w), final
  Tensor difficulty_map;  // M_D, final
  Tensor sensitivity;     // S under the final w
  fusion::FusionWeights omega;
  std::vector<TraceEntry> trace;  // steps 0..N
  int iwr_events = 0;
  int dap_events = 0;
  double wall_seconds = 0.0;
};

// Raised when a module error stops the loop; carries the trace so far.
class RunAborted : public Error {
 public:
  RunAborted(const std::string& what, std::vector<TraceEntry> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  std::vector<TraceEntry> trace_;
};

struct RunHooks {
  std::function<void(const TraceEntry&)> on_step;
  std::function<void(int, const Tensor&)> on_iterate;  // x_i after step i
  WarnFn on_warning;
  std::ostream* omega_log = nullptr;
};

// Per-call seeds: one stream per step for the loss, one for DAP.
inline std::uint64_t step_seed(std::uint64_t run_seed, int step) {
  return detail::mix_seed(run_seed, static_cast<std::uint64_t>(step));
}
inline std::uint64_t dap_seed(std::uint64_t run_seed, int step) {
  return detail::mix_seed(run_seed ^ 0xDA9DA9DA9ull, static_cast<std::uint64_t>(step));
}

inline ProtectionResult protect_run(const ImageTensor& image, const ImageTensor& target_image,
                                    const ProtectionConfig& cfg,
                                    oracle::GuidanceOracle& oracle,
                                    const RunHooks& hooks = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const Tensor& x = image;
  const Tensor& y = target_image;
  if (!x.same_shape(y)) {
    throw InvalidInput("target " + y.shape_string() + " does not match image " +
                       x.shape_string());
  }
  const oracle::LspSpec spec = make_spec(cfg, y);
  const constraints::TotalLossOptions loss_opt = make_loss_options(cfg);

  jnd::JndOptions jopt;
  jopt.pixels_per_degree = cfg.pixels_per_degree;
  const jnd::JndBank bank = jnd::compute_bank(x, jopt);
  std::vector<Tensor> sens;
  for (const auto& s : bank.sensitivity) sens.push_back(s.values);

  fusion::FusionState state = fusion::init_state(fusion::strength_values(bank.strength),
                                                 cfg.omega_step);
  state.consistency_gain = cfg.consistency_gain;

  const Tensor ones(x.height(), x.width(), 1, 1.0);
  Tensor perceptual = cfg.use_maps ? state.current_map() : ones;
  Tensor difficulty = ones;
  Tensor sensitivity = fusion::fuse_maps(sens, &state.omega);

  ProtectionResult res;
  Tensor cur = x;
  auto record = [&](int step, const constraints::TotalLoss& tl) {
    TraceEntry e;
    e.step = step;
    e.lsp = tl.lsp;
    e.encoder_loss = tl.encoder_loss;
    e.diffusion_loss = tl.diffusion_loss;
    e.penalty = tl.penalty;
    e.lpips = tl.lpips;
    e.lowpass = tl.lowpass;
    e.clip = tl.clip;
    e.objective = tl.objective;
    e.linf = max_abs_diff(cur, x);
    const bool event = step > 0 && step % cfg.interval == 0;
    e.iwr = event && cfg.use_maps && cfg.use_iwr;
    e.dap = event && cfg.use_dap;
    res.trace.push_back(e);
  };
  auto flush = [&] {
    if (hooks.on_step && !res.trace.empty()) hooks.on_step(res.trace.back());
  };

  try {
    for (int i = 1; i <= cfg.steps; ++i) {
      const std::uint64_t seed = step_seed(cfg.seed, i);
      const constraints::TotalLoss tl =
          constraints::total_loss(x, cur, sensitivity, spec, loss_opt, oracle, seed);
      record(i - 1, tl);
      flush();

      const Tensor step = signed_step(tl.grad, cfg.alpha);
      cur = apply_step(x, cur, step, perceptual, difficulty, cfg.eta);
      if (hooks.on_iterate) hooks.on_iterate(i, cur);

      if (i % cfg.interval == 0) {
        if (cfg.use_maps && cfg.use_iwr) {
          state = fusion::iwr_update(std::move(state), x, step, spec, oracle, seed);
          perceptual = state.current_map();
          sensitivity = fusion::fuse_maps(sens, &state.omega);
          ++res.iwr_events;
          if (hooks.omega_log) fusion::log_omega(*hooks.omega_log, i, state.omega);
        }
        if (cfg.use_dap) {
          difficulty = dap_difficulty(x, cur, cfg, oracle, dap_seed(cfg.seed, i),
                                      hooks.on_warning);
          ++res.dap_events;
        }
      }
    }
    const constraints::TotalLoss tl = constraints::total_loss(
        x, cur, sensitivity, spec, loss_opt, oracle, step_seed(cfg.seed, cfg.steps + 1));
    record(cfg.steps, tl);
    flush();
  } catch (const RunAborted&) {
    throw;
  } catch (const Error& e) {
    throw RunAborted(e.what(), res.trace);
  }

  res.protected_image = cur;
  res.delta = cur - x;
  res.perceptual_map = perceptual;
  res.difficulty_map = difficulty;
  res.sensitivity = sensitivity;
  res.omega = state.omega;
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Sum_i S_i |d_i| over pixels and channels.
inline double sensitivity_mass(const Tensor& sensitivity, const Tensor& delta) {
  constraints::require_mask(sensitivity, delta);
  const std::size_t c = delta.channels();
  double m = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) m += sensitivity[i / c] * std::abs(delta[i]);
  return m;
}

}  // namespace impasto::protect

#endif  // IMPASTO_PROTECT_HPP_
