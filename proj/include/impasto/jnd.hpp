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

// Just-noticeable-difference estimators and their post-processing.
//
// Five raw estimators run on the 8-bit-scaled luminance plane:
//
//   LA       luminance adaptation over the 3x3 background mean
//   CM       contrast masking from four directional 5x5 operators
//   CSF      energy removed by a contrast-sensitivity filter in the DFT domain
//   STDEV    9x9 block standard deviation
//   ENTROPY  9x9 block Shannon entropy of the 8-bit histogram
//
// A high raw value means "changes here are hard to see". postprocess_map()
// turns a raw map into a SensitivityMap (1 = most perceptible) and a
// StrengthMap, a four-level perturbation multiplier assigned by sensitivity
// quartile.

#ifndef IMPASTO_JND_HPP_
#define IMPASTO_JND_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "impasto/detail/fft.hpp"
#include "impasto/error.hpp"
#include "impasto/tensor.hpp"

namespace impasto::jnd {

enum class JndKind { kLuminanceAdaptation, kContrastMasking, kCsf, kStdev, kEntropy };

inline constexpr std::array<JndKind, 5> kAllKinds = {
    JndKind::kLuminanceAdaptation, JndKind::kContrastMasking, JndKind::kCsf,
    JndKind::kStdev, JndKind::kEntropy};

inline std::string_view kind_name(JndKind k) {
  switch (k) {
    case JndKind::kLuminanceAdaptation: return "la";
    case JndKind::kContrastMasking: return "cm";
    case JndKind::kCsf: return "csf";
    case JndKind::kStdev: return "stdev";
    case JndKind::kEntropy: return "entropy";
  }
  return "?";
}

struct RawJndMap {
  JndKind kind;
  Tensor values;  // H x W x 1, non-negative
};

struct SensitivityMap {
  Tensor values;  // H x W x 1 in [0,1]
};

struct StrengthMap {
  Tensor values;  // H x W x 1, entries from kStrengthLevels
};

// ---------------------------------------------------------------------------
// Scalar models.

// Visibility threshold as a function of background luminance B in [0,255].
inline double la_from_background(double b) {
  if (b <= 127.0) return 17.0 * (1.0 - std::sqrt(b / 127.0)) + 3.0;
  return 3.0 / 128.0 * (b - 127.0) + 3.0;
}

// Masking as a function of luminance contrast LC >= 0.
inline double cm_from_contrast(double lc) {
  return 0.115 * 16.0 * std::pow(lc, 2.4) / (lc * lc + 26.0 * 26.0);
}

inline constexpr double kCsfAlpha = 0.0192;
inline constexpr double kCsfBeta = 0.114;
inline constexpr double kCsfCutoff = 7.8909;  // c/deg
inline constexpr double kCsfLowGain = 0.981;
inline constexpr double kDefaultPixelsPerDegree = 32.0;

// Contrast-sensitivity gain at radial frequency f (cycles/degree) and
// orientation theta, including the oblique-effect correction.
inline double csf_gain(double f, double theta) {
  if (f < kCsfCutoff) return kCsfLowGain;
  const double f_theta = f / (0.15 * std::cos(4.0 * theta) + 0.85);
  const double bf = kCsfBeta * f_theta;
  return 2.6 * (kCsfAlpha + bf) * std::exp(-std::pow(bf, 1.1));
}

// Perceived lightness of an 8-bit value on an sRGB-like display.
inline double perceived_lightness(double v8) {
  return std::cbrt(std::pow(0.02874 * v8, 2.2));
}

inline double window_stdev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo == *hi) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

inline int to_bin(double v8) {
  return static_cast<int>(std::clamp(std::lround(v8), 0L, 255L));
}

// Base-2 Shannon entropy of the 256-bin histogram of rounded values.
inline double window_entropy(std::span<const double> v) {
  if (v.empty()) return 0.0;
  std::array<std::uint32_t, 256> hist{};
  for (double x : v) ++hist[static_cast<std::size_t>(to_bin(x))];
  const double n = static_cast<double>(v.size());
  double h = 0.0;
  for (std::uint32_t c : hist) {
    if (c == 0) continue;
    const double p = c / n;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;
}

// ---------------------------------------------------------------------------
// Directional contrast operators.

inline constexpr std::size_t kKernelSize = 5;
using DirectionalKernel = std::array<double, kKernelSize * kKernelSize>;

// Chou-Li operators; each is zero-sum with positive mass 16, which the 1/16
// factor in the contrast measure normalizes. The same grid ships as
// data/directional_kernels.txt.
inline const std::array<DirectionalKernel, 4>& default_kernels() {
  static const std::array<DirectionalKernel, 4> k = {{
      {0, 0, 0, 0, 0,  1, 3, 8, 3, 1,  0, 0, 0, 0, 0,  -1, -3, -8, -3, -1,  0, 0, 0, 0, 0},
      {0, 0, 1, 0, 0,  0, 8, 3, 0, 0,  1, 3, 0, -3, -1,  0, 0, -3, -8, 0,  0, 0, -1, 0, 0},
      {0, 0, 1, 0, 0,  0, 0, 3, 8, 0,  -1, -3, 0, 3, 1,  0, -8, -3, 0, 0,  0, 0, -1, 0, 0},
      {0, 1, 0, -1, 0,  0, 3, 0, -3, 0,  0, 8, 0, -8, 0,  0, 3, 0, -3, 0,  0, 1, 0, -1, 0},
  }};
  return k;
}

// Parses the kernel data file: blank lines and '#' comments are ignored;
// each kernel is a "kernel <name>" line followed by five rows of five
// integers.
inline std::vector<DirectionalKernel> parse_kernels(std::istream& in) {
  std::vector<DirectionalKernel> out;
  std::string line;
  std::vector<double> pending;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    if (pending.size() != kKernelSize * kKernelSize) {
      throw InvalidConfig("kernel block needs 25 coefficients, got " +
                          std::to_string(pending.size()));
    }
    DirectionalKernel k{};
    std::copy(pending.begin(), pending.end(), k.begin());
    out.push_back(k);
    pending.clear();
  };
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "kernel") {
      flush();
      open = true;
      continue;
    }
    if (!open) throw InvalidConfig("coefficients before first 'kernel' line");
    ls.clear();
    ls.str(line);
    long v = 0;
    while (ls >> v) pending.push_back(static_cast<double>(v));
    if (!ls.eof()) throw InvalidConfig("non-integer coefficient: " + line);
  }
  flush();
  if (out.empty()) throw InvalidConfig("no kernels found");
  return out;
}

inline std::vector<DirectionalKernel> load_kernels(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open kernel file " + p.string());
  return parse_kernels(in);
}

// ---------------------------------------------------------------------------
// Raw estimators.

inline RawJndMap estimate_la(const LuminancePlane& lum) {
  Tensor background = box_mean(lum.values, 1);
  for (double& b : background.values()) b = la_from_background(b);
  return {JndKind::kLuminanceAdaptation, std::move(background)};
}

// Luminance contrast: (1/16) max_k |lum * G_k| with edge replication.
inline Tensor luminance_contrast(const LuminancePlane& lum,
                                 std::span<const DirectionalKernel> kernels) {
  const Tensor& p = lum.values;
  const std::size_t h = p.height(), w = p.width();
  const std::ptrdiff_t r = kKernelSize / 2;
  Tensor lc(h, w, 1);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double center = p(y, x);
      double best = 0.0;
      for (const auto& k : kernels) {
        // Kernels are zero-sum, so responses are taken against the centre
        // value; flat neighbourhoods then give exactly zero.
        double acc = 0.0;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
          const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            const std::size_t xx = clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w);
            acc += k[static_cast<std::size_t>((dy + r) * 5 + dx + r)] *
                   (p(yy, xx) - center);
          }
        }
        best = std::max(best, std::abs(acc));
      }
      lc(y, x) = best / 16.0;
    }
  }
  return lc;
}

inline RawJndMap estimate_cm(const LuminancePlane& lum,
                             std::span<const DirectionalKernel> kernels) {
  Tensor lc = luminance_contrast(lum, kernels);
  for (double& v : lc.values()) v = cm_from_contrast(v);
  return {JndKind::kContrastMasking, std::move(lc)};
}

inline RawJndMap estimate_cm(const LuminancePlane& lum) {
  return estimate_cm(lum, default_kernels());
}

// Maps DFT indices to cycles/degree given the display's pixels-per-degree.
inline double radial_frequency(long ky, long kx, std::size_t h, std::size_t w,
                               double ppd) {
  const double fy = static_cast<double>(ky) / static_cast<double>(h);
  const double fx = static_cast<double>(kx) / static_cast<double>(w);
  return ppd * std::hypot(fx, fy);
}

// |x_check - x_csf| where x_csf is the CSF-filtered perceived-lightness
// image. The DC term passes unchanged so flat images give a zero map.
inline RawJndMap estimate_csf(const LuminancePlane& lum,
                              double ppd = kDefaultPixelsPerDegree) {
  if (!(ppd > 0.0) || !std::isfinite(ppd)) {
    throw InvalidConfig("pixels-per-degree must be positive, got " +
                        std::to_string(ppd));
  }
  const std::size_t h = lum.height(), w = lum.width();
  Tensor lightness(h, w, 1);
  for (std::size_t i = 0; i < lightness.size(); ++i) {
    lightness[i] = perceived_lightness(lum.values[i]);
  }
  Tensor out(h, w, 1);
  const auto vals = lightness.values();
  if (std::all_of(vals.begin(), vals.end(),
                  [&](double v) { return v == vals.front(); })) {
    return {JndKind::kCsf, std::move(out)};
  }
  const Tensor filtered = detail::filter_real_2d(lightness, [&](long ky, long kx) {
    if (ky == 0 && kx == 0) return 1.0;
    const double f = radial_frequency(ky, kx, h, w, ppd);
    const double theta = std::atan2(static_cast<double>(ky) / h,
                                    static_cast<double>(kx) / w);
    return csf_gain(f, theta);
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::abs(lightness[i] - filtered[i]);
  }
  return {JndKind::kCsf, std::move(out)};
}

inline constexpr std::size_t kBlockRadius = 4;  // 9x9 window

inline RawJndMap estimate_stdev(const LuminancePlane& lum) {
  const Tensor& p = lum.values;
  const std::size_t h = p.height(), w = p.width();
  const auto r = static_cast<std::ptrdiff_t>(kBlockRadius);
  Tensor out(h, w, 1);
  std::vector<double> window;
  window.reserve((2 * kBlockRadius + 1) * (2 * kBlockRadius + 1));
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      window.clear();
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
        const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          window.push_back(p(yy, clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w)));
        }
      }
      out(y, x) = window_stdev(window);
    }
  }
  return {JndKind::kStdev, std::move(out)};
}

inline RawJndMap estimate_entropy(const LuminancePlane& lum) {
  const Tensor& p = lum.values;
  const std::size_t h = p.height(), w = p.width();
  const auto r = static_cast<std::ptrdiff_t>(kBlockRadius);
  const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
  std::vector<int> bins(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) bins[i] = to_bin(p[i]);
  Tensor out(h, w, 1);
  std::array<std::uint32_t, 256> hist{};
  std::vector<int> touched;
  touched.reserve(static_cast<std::size_t>(n));
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      touched.clear();
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
        const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const int b = bins[yy * w + clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w)];
          if (hist[static_cast<std::size_t>(b)]++ == 0) touched.push_back(b);
        }
      }
      // Accumulate in bin order so the result matches window_entropy().
      std::sort(touched.begin(), touched.end());
      double e = 0.0;
      for (int b : touched) {
        const double q = hist[static_cast<std::size_t>(b)] / n;
        e -= q * std::log2(q);
        hist[static_cast<std::size_t>(b)] = 0;
      }
      out(y, x) = e == 0.0 ? 0.0 : e;
    }
  }
  return {JndKind::kEntropy, std::move(out)};
}

struct JndOptions {
  double pixels_per_degree = kDefaultPixelsPerDegree;
  std::vector<DirectionalKernel> kernels{default_kernels().begin(),
                                         default_kernels().end()};
};

inline RawJndMap estimate(JndKind kind, const LuminancePlane& lum,
                          const JndOptions& opt = {}) {
  switch (kind) {
    case JndKind::kLuminanceAdaptation: return estimate_la(lum);
    case JndKind::kContrastMasking: return estimate_cm(lum, opt.kernels);
    case JndKind::kCsf: return estimate_csf(lum, opt.pixels_per_degree);
    case JndKind::kStdev: return estimate_stdev(lum);
    case JndKind::kEntropy: return estimate_entropy(lum);
  }
  throw InvalidInput("unknown JND kind");
}

// ---------------------------------------------------------------------------
// Post-processing.

inline constexpr double kStrengthDecay = 0.85;
inline constexpr std::array<double, 4> kStrengthLevels = {
    1.0, kStrengthDecay, kStrengthDecay * kStrengthDecay,
    kStrengthDecay * kStrengthDecay * kStrengthDecay};

// 1 - minmax(raw). A constant raw map has no sensitivity structure and maps
// to all zeros.
inline SensitivityMap to_sensitivity(const RawJndMap& raw) {
  if (!all_finite(raw.values)) throw InvalidInput("raw JND map is not finite");
  const auto v = raw.values.values();
  Tensor s(raw.values.height(), raw.values.width(), 1);
  if (v.empty() || std::all_of(v.begin(), v.end(),
                               [&](double x) { return x == v.front(); })) {
    return {std::move(s)};
  }
  const Tensor n = minmax_normalize(raw.values);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 - n[i];
  return {std::move(s)};
}

// Quartile quantization. Pixels are ranked by (sensitivity, raster index);
// rank r of n lands in level floor(4r/n), so the least sensitive quarter gets
// full strength and ties at a boundary go to the stronger level in raster
// order. A constant map gets full strength everywhere.
inline StrengthMap quantize_strength(const SensitivityMap& s) {
  const Tensor& v = s.values;
  const std::size_t n = v.size();
  Tensor out(v.height(), v.width(), 1, kStrengthLevels[0]);
  if (n == 0) return {std::move(out)};
  const auto vals = v.values();
  if (std::all_of(vals.begin(), vals.end(),
                  [&](double x) { return x == vals.front(); })) {
    return {std::move(out)};
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  for (std::size_t rank = 0; rank < n; ++rank) {
    out[order[rank]] = kStrengthLevels[(4 * rank) / n];
  }
  return {std::move(out)};
}

struct ProcessedMap {
  SensitivityMap sensitivity;
  StrengthMap strength;
};

inline ProcessedMap postprocess_map(const RawJndMap& raw) {
  SensitivityMap s = to_sensitivity(raw);
  StrengthMap m = quantize_strength(s);
  return {std::move(s), std::move(m)};
}

// All five estimators plus their processed forms, in kAllKinds order.
struct JndBank {
  std::vector<RawJndMap> raw;
  std::vector<SensitivityMap> sensitivity;
  std::vector<StrengthMap> strength;
};

inline JndBank compute_bank(const Tensor& img, const JndOptions& opt = {}) {
  const LuminancePlane lum = to_luminance(img);
  JndBank bank;
  for (JndKind k : kAllKinds) {
    RawJndMap raw = estimate(k, lum, opt);
    ProcessedMap pm = postprocess_map(raw);
    bank.raw.push_back(std::move(raw));
    bank.sensitivity.push_back(std::move(pm.sensitivity));
    bank.strength.push_back(std::move(pm.strength));
  }
  return bank;
}

}  // namespace impasto::jnd

#endif  // IMPASTO_JND_HPP_
