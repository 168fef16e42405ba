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

// Masked multi-layer feature distance (LPIPS form) over a pluggable feature
// extractor.

#ifndef IMPASTO_PERCEPTUAL_HPP_
#define IMPASTO_PERCEPTUAL_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "impasto/detail/random.hpp"
#include "impasto/error.hpp"
#include "impasto/tensor.hpp"

namespace impasto {

struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

// A differentiable stack of spatial feature layers phi_l with per-channel
// weights w_l.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  virtual std::vector<Tensor> forward(const Tensor& x) const = 0;

  virtual std::vector<double> channel_weights(std::size_t layer) const = 0;

  // Vector-Jacobian product: given d(loss)/d(phi_l(x)) for every layer,
  // returns d(loss)/dx.
  virtual Tensor backward(const Tensor& x,
                          const std::vector<Tensor>& cotangents) const = 0;
};

// Two seeded 3x3 convolutions, stride 2, zero padding, |.| activation, all
// channel weights 1. Test scaffolding with the right shape for the masked
// feature loss; it is not a learned perceptual metric.
class SurrogateFeatureExtractor final : public FeatureExtractor {
 public:
  static constexpr std::size_t kLayers = 2;
  static constexpr std::size_t kWidth = 8;  // output channels per layer

  explicit SurrogateFeatureExtractor(std::uint64_t seed = 0x1A57) : seed_(seed) {}

  // Kernel layout: [out][in][ky][kx].
  double weight(std::size_t layer, std::size_t cin, std::size_t co,
                std::size_t ci, std::size_t ky, std::size_t kx) const {
    const std::uint64_t idx = ((co * cin + ci) * 3 + ky) * 3 + kx;
    const double scale = 1.0 / std::sqrt(9.0 * static_cast<double>(cin));
    return scale * detail::uniform_pm1(detail::mix_seed(seed_, 0xF00 + layer), idx);
  }

  static std::size_t out_size(std::size_t n) { return (n + 1) / 2; }

  std::vector<Tensor> forward(const Tensor& x) const override {
    std::vector<Tensor> out;
    Tensor cur = x;
    for (std::size_t l = 0; l < kLayers; ++l) {
      Tensor pre = conv(l, cur);
      for (double& v : pre.values()) v = std::abs(v);
      out.push_back(pre);
      cur = std::move(pre);
    }
    return out;
  }

  std::vector<double> channel_weights(std::size_t /*layer*/) const override {
    return std::vector<double>(kWidth, 1.0);
  }

  Tensor backward(const Tensor& x,
                  const std::vector<Tensor>& cotangents) const override {
    if (cotangents.size() != kLayers) {
      throw InvalidInput("surrogate extractor expects 2 cotangent layers");
    }
    std::vector<Tensor> inputs{x};
    std::vector<Tensor> pre;
    for (std::size_t l = 0; l < kLayers; ++l) {
      pre.push_back(conv(l, inputs.back()));
      Tensor act = pre.back();
      for (double& v : act.values()) v = std::abs(v);
      inputs.push_back(std::move(act));
    }
    Tensor upstream(pre.back().height(), pre.back().width(), kWidth);
    for (std::size_t l = kLayers; l-- > 0;) {
      Tensor g = upstream;
      g += cotangents[l];
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double p = pre[l][i];
        g[i] *= p > 0.0 ? 1.0 : (p < 0.0 ? -1.0 : 0.0);
      }
      upstream = conv_transpose(l, g, inputs[l]);
    }
    return upstream;
  }

 private:
  std::vector<double> kernel(std::size_t layer, std::size_t cin) const {
    std::vector<double> k(kWidth * cin * 9);
    for (std::size_t co = 0; co < kWidth; ++co)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx)
            k[((co * cin + ci) * 3 + ky) * 3 + kx] = weight(layer, cin, co, ci, ky, kx);
    return k;
  }

  Tensor conv(std::size_t layer, const Tensor& in) const {
    const std::size_t h = in.height(), w = in.width(), cin = in.channels();
    const std::size_t oh = out_size(h), ow = out_size(w);
    const std::vector<double> k = kernel(layer, cin);
    Tensor out(oh, ow, kWidth);
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        for (std::size_t co = 0; co < kWidth; ++co) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(2 * y + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(2 * x + kx) - 1;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              for (std::size_t ci = 0; ci < cin; ++ci) {
                acc += k[((co * cin + ci) * 3 + ky) * 3 + kx] *
                       in(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci);
              }
            }
          }
          out(y, x, co) = acc;
        }
      }
    }
    return out;
  }

  Tensor conv_transpose(std::size_t layer, const Tensor& g,
                        const Tensor& like) const {
    const std::size_t h = like.height(), w = like.width(), cin = like.channels();
    const std::vector<double> k = kernel(layer, cin);
    Tensor out(h, w, cin);
    for (std::size_t y = 0; y < g.height(); ++y) {
      for (std::size_t x = 0; x < g.width(); ++x) {
        for (std::size_t co = 0; co < kWidth; ++co) {
          const double gv = g(y, x, co);
          if (gv == 0.0) continue;
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(2 * y + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(2 * x + kx) - 1;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              for (std::size_t ci = 0; ci < cin; ++ci) {
                out(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci) +=
                    k[((co * cin + ci) * 3 + ky) * 3 + kx] * gv;
              }
            }
          }
        }
      }
    }
    return out;
  }

  std::uint64_t seed_;
};

namespace detail {

// Row-stochastic area-averaging weights from n input cells to m output cells.
inline std::vector<std::vector<std::pair<std::size_t, double>>> area_weights(
    std::size_t n, std::size_t m) {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(m);
  const double scale = static_cast<double>(n) / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double lo = j * scale, hi = (j + 1) * scale;
    for (auto i = static_cast<std::size_t>(std::floor(lo));
         i < n && static_cast<double>(i) < hi; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) rows[j].emplace_back(i, overlap / scale);
    }
  }
  return rows;
}

}  // namespace detail

// Area-mean resampling of a single-channel map.
inline Tensor area_downsample(const Tensor& map, std::size_t out_h,
                              std::size_t out_w) {
  if (map.channels() != 1) throw InvalidInput("area_downsample expects one channel");
  if (out_h == map.height() && out_w == map.width()) return map;
  const auto wy = detail::area_weights(map.height(), out_h);
  const auto wx = detail::area_weights(map.width(), out_w);
  Tensor out(out_h, out_w, 1);
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (const auto& [iy, ay] : wy[y]) {
        for (const auto& [ix, ax] : wx[x]) acc += ay * ax * map(iy, ix);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

// sum_l (1/d_l) sum_i S_l,i * || w_l * (phi_l(x)_i - phi_l(x_hat)_i) ||^2
// with S_l the area-mean of `mask` at layer l's resolution and d_l the number
// of spatial positions of layer l. Gradient is with respect to x_hat.
inline LossGrad masked_lpips_loss(const Tensor& x, const Tensor& x_hat,
                                  const Tensor& mask,
                                  const FeatureExtractor& feat) {
  x.require_same_shape(x_hat);
  if (mask.channels() != 1 || !mask.same_extent(x)) {
    throw InvalidInput("mask " + mask.shape_string() + " does not match image " +
                       x.shape_string());
  }
  const std::vector<Tensor> fx = feat.forward(x);
  const std::vector<Tensor> fh = feat.forward(x_hat);
  LossGrad out;
  std::vector<Tensor> cot;
  for (std::size_t l = 0; l < fx.size(); ++l) {
    const Tensor& a = fx[l];
    const Tensor& b = fh[l];
    const std::vector<double> wl = feat.channel_weights(l);
    const Tensor sl = area_downsample(mask, a.height(), a.width());
    const double inv_d = 1.0 / static_cast<double>(a.pixels());
    Tensor g(b.height(), b.width(), b.channels());
    const std::size_t c = a.channels();
    for (std::size_t p = 0; p < a.pixels(); ++p) {
      double ss = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double diff = b[p * c + k] - a[p * c + k];
        const double wd = wl[k] * diff;
        ss += wd * wd;
        g[p * c + k] = inv_d * sl[p] * 2.0 * wl[k] * wl[k] * diff;
      }
      out.loss += inv_d * sl[p] * ss;
    }
    cot.push_back(std::move(g));
  }
  out.grad = feat.backward(x_hat, cot);
  return out;
}

}  // namespace impasto

#endif  // IMPASTO_PERCEPTUAL_HPP_
