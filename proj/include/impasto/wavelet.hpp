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

// Single-level orthogonal 2-D DWT with periodic extension, and the low-pass
// reconstruction LP(x) = L^T (L x L^T) L.

#ifndef IMPASTO_WAVELET_HPP_
#define IMPASTO_WAVELET_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "impasto/error.hpp"
#include "impasto/tensor.hpp"

namespace impasto::wavelet {

struct WaveletFilterPair {
  std::string name;
  std::vector<double> low;
  std::vector<double> high;
};

inline WaveletFilterPair haar() {
  const double r = 1.0 / std::sqrt(2.0);
  return {"haar", {r, r}, {r, -r}};
}

// Daubechies, two vanishing moments (four taps).
inline WaveletFilterPair db2() {
  const double s3 = std::sqrt(3.0), d = 4.0 * std::sqrt(2.0);
  std::vector<double> lo = {(1 + s3) / d, (3 + s3) / d, (3 - s3) / d, (1 - s3) / d};
  std::vector<double> hi(lo.size());
  for (std::size_t k = 0; k < lo.size(); ++k) {
    hi[k] = (k % 2 == 0 ? 1.0 : -1.0) * lo[lo.size() - 1 - k];
  }
  return {"db2", lo, hi};
}

inline WaveletFilterPair filter_by_name(std::string_view name) {
  if (name == "haar") return haar();
  if (name == "db2") return db2();
  throw InvalidConfig("unknown wavelet '" + std::string(name) + "'");
}

struct Bands {
  Tensor ll, lh, hl, hh;  // lh: high along rows (vertical), low along columns
};

namespace detail {

// Strided 1-D analysis along one axis of a tensor. `along_rows` filters the
// height axis.
inline Tensor analyze(const Tensor& t, const std::vector<double>& f,
                      bool along_rows) {
  const std::size_t h = t.height(), w = t.width(), c = t.channels();
  const std::size_t n = along_rows ? h : w;
  const std::size_t half = n / 2;
  Tensor out(along_rows ? half : h, along_rows ? w : half, c);
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t o = 0; o < (along_rows ? w : h); ++o) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) {
          const std::size_t i = (2 * k + j) % n;
          acc += f[j] * (along_rows ? t(i, o, ch) : t(o, i, ch));
        }
        if (along_rows) {
          out(k, o, ch) = acc;
        } else {
          out(o, k, ch) = acc;
        }
      }
    }
  }
  return out;
}

// Transpose of analyze(): accumulates into a tensor of full length n.
inline void synthesize_into(const Tensor& band, const std::vector<double>& f,
                            bool along_rows, Tensor& out) {
  const std::size_t n = along_rows ? out.height() : out.width();
  const std::size_t half = n / 2;
  const std::size_t other = along_rows ? out.width() : out.height();
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t o = 0; o < other; ++o) {
      for (std::size_t ch = 0; ch < out.channels(); ++ch) {
        const double v = along_rows ? band(k, o, ch) : band(o, k, ch);
        for (std::size_t j = 0; j < f.size(); ++j) {
          const std::size_t i = (2 * k + j) % n;
          (along_rows ? out(i, o, ch) : out(o, i, ch)) += f[j] * v;
        }
      }
    }
  }
}

inline void require_even(const Tensor& t, const WaveletFilterPair& f) {
  if (t.height() % 2 != 0 || t.width() % 2 != 0) {
    throw InvalidInput("DWT needs even extents, got " + t.shape_string());
  }
  if (f.low.size() != f.high.size() || f.low.empty()) {
    throw InvalidConfig("wavelet filters must be non-empty and equal length");
  }
}

inline Tensor pad_even(const Tensor& t) {
  const std::size_t h = t.height() + t.height() % 2;
  const std::size_t w = t.width() + t.width() % 2;
  if (h == t.height() && w == t.width()) return t;
  Tensor out(h, w, t.channels());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < t.channels(); ++ch) {
        out(y, x, ch) = t(std::min(y, t.height() - 1), std::min(x, t.width() - 1), ch);
      }
    }
  }
  return out;
}

// Adjoint of pad_even(): replicated entries fold back onto the edge.
inline Tensor pad_even_adjoint(const Tensor& padded, std::size_t h, std::size_t w) {
  Tensor out(h, w, padded.channels());
  for (std::size_t y = 0; y < padded.height(); ++y) {
    for (std::size_t x = 0; x < padded.width(); ++x) {
      for (std::size_t ch = 0; ch < padded.channels(); ++ch) {
        out(std::min(y, h - 1), std::min(x, w - 1), ch) += padded(y, x, ch);
      }
    }
  }
  return out;
}

inline Tensor crop(const Tensor& t, std::size_t h, std::size_t w) {
  if (t.height() == h && t.width() == w) return t;
  Tensor out(h, w, t.channels());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < t.channels(); ++ch) out(y, x, ch) = t(y, x, ch);
    }
  }
  return out;
}

// Adjoint of crop(): zero extension.
inline Tensor crop_adjoint(const Tensor& t, std::size_t h, std::size_t w) {
  if (t.height() == h && t.width() == w) return t;
  Tensor out(h, w, t.channels());
  for (std::size_t y = 0; y < t.height(); ++y) {
    for (std::size_t x = 0; x < t.width(); ++x) {
      for (std::size_t ch = 0; ch < t.channels(); ++ch) out(y, x, ch) = t(y, x, ch);
    }
  }
  return out;
}

}  // namespace detail

inline Bands dwt2(const Tensor& x, const WaveletFilterPair& f = haar()) {
  detail::require_even(x, f);
  const Tensor lo_r = detail::analyze(x, f.low, true);
  const Tensor hi_r = detail::analyze(x, f.high, true);
  return {detail::analyze(lo_r, f.low, false), detail::analyze(hi_r, f.low, false),
          detail::analyze(lo_r, f.high, false), detail::analyze(hi_r, f.high, false)};
}

inline Tensor idwt2(const Bands& b, const WaveletFilterPair& f = haar()) {
  const std::size_t h = 2 * b.ll.height(), w = 2 * b.ll.width();
  const std::size_t c = b.ll.channels();
  Tensor lo_r(h / 2, w, c), hi_r(h / 2, w, c);
  detail::synthesize_into(b.ll, f.low, false, lo_r);
  detail::synthesize_into(b.hl, f.high, false, lo_r);
  detail::synthesize_into(b.lh, f.low, false, hi_r);
  detail::synthesize_into(b.hh, f.high, false, hi_r);
  Tensor out(h, w, c);
  detail::synthesize_into(lo_r, f.low, true, out);
  detail::synthesize_into(hi_r, f.high, true, out);
  return out;
}

// LL-band reconstruction at the input's extent. Odd extents are padded by
// edge replication and cropped afterwards.
inline Tensor dwt_lowpass(const Tensor& x, const WaveletFilterPair& f = haar()) {
  const Tensor padded = detail::pad_even(x);
  detail::require_even(padded, f);
  if (f.name == "haar") {
    // The Haar LL reconstruction is the 2x2 block mean. Averaging in pairs
    // keeps constants bit-exact, which the (1/sqrt2)^2 taps do not.
    Tensor out(padded.height(), padded.width(), padded.channels());
    const std::size_t c = padded.channels();
    for (std::size_t y = 0; y < out.height(); y += 2) {
      for (std::size_t xx = 0; xx < out.width(); xx += 2) {
        for (std::size_t k = 0; k < c; ++k) {
          const double top = (padded(y, xx, k) + padded(y, xx + 1, k)) * 0.5;
          const double bottom = (padded(y + 1, xx, k) + padded(y + 1, xx + 1, k)) * 0.5;
          const double m = (top + bottom) * 0.5;
          out(y, xx, k) = out(y, xx + 1, k) = out(y + 1, xx, k) = out(y + 1, xx + 1, k) = m;
        }
      }
    }
    return detail::crop(out, x.height(), x.width());
  }
  const Tensor ll =
      detail::analyze(detail::analyze(padded, f.low, true), f.low, false);
  Tensor lo_r(padded.height() / 2, padded.width(), padded.channels());
  detail::synthesize_into(ll, f.low, false, lo_r);
  Tensor out(padded.height(), padded.width(), padded.channels());
  detail::synthesize_into(lo_r, f.low, true, out);
  return detail::crop(out, x.height(), x.width());
}

// Adjoint of dwt_lowpass(); equal to dwt_lowpass() itself for even extents.
inline Tensor dwt_lowpass_adjoint(const Tensor& g, const WaveletFilterPair& f = haar()) {
  const std::size_t ph = g.height() + g.height() % 2;
  const std::size_t pw = g.width() + g.width() % 2;
  const Tensor ext = detail::crop_adjoint(g, ph, pw);
  const Tensor proj = dwt_lowpass(ext, f);  // symmetric on even extents
  return detail::pad_even_adjoint(proj, g.height(), g.width());
}

}  // namespace impasto::wavelet

#endif  // IMPASTO_WAVELET_HPP_
