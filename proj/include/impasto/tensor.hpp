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

// Dense image containers shared by every module.
//
// Tensor is the unconstrained workhorse: an H x W x C block of doubles,
// row-major and channel-last. It carries perturbations, gradients and
// per-pixel maps (C == 1). ImageTensor wraps a Tensor and guarantees the
// invariants of a real image: one or three channels, every value finite and
// inside [0,1], and at least kMinImageSide pixels along each side.

#ifndef IMPASTO_TENSOR_HPP_
#define IMPASTO_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "impasto/error.hpp"

namespace impasto {

inline constexpr std::size_t kMinImageSide = 16;

class Tensor {
 public:
  Tensor() = default;

  Tensor(std::size_t height, std::size_t width, std::size_t channels,
         double fill = 0.0)
      : height_(height),
        width_(width),
        channels_(channels),
        data_(height * width * channels, fill) {}

  Tensor(std::size_t height, std::size_t width, std::size_t channels,
         std::vector<double> data)
      : height_(height),
        width_(width),
        channels_(channels),
        data_(std::move(data)) {
    if (data_.size() != height_ * width_ * channels_) {
      throw InvalidInput("tensor data size " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double operator()(std::size_t row, std::size_t col,
                    std::size_t ch = 0) const {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& vec() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool same_extent(const Tensor& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" +
           std::to_string(channels_);
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  void require_same_shape(const Tensor& o) const {
    if (!same_shape(o)) {
      throw InvalidInput("shape mismatch: " + shape_string() + " vs " +
                         o.shape_string());
    }
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

inline Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
inline Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
inline Tensor operator*(Tensor a, double s) { return a *= s; }
inline Tensor operator*(double s, Tensor a) { return a *= s; }

inline double dot(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

inline bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](double v) { return std::isfinite(v); });
}

// Multiplies every channel of `t` by the single-channel `map` at the same
// pixel.
inline Tensor modulate(Tensor t, const Tensor& map) {
  if (map.channels() != 1 || !map.same_extent(t)) {
    throw InvalidInput("modulation map " + map.shape_string() +
                       " does not match " + t.shape_string());
  }
  const std::size_t c = t.channels();
  for (std::size_t p = 0; p < t.pixels(); ++p) {
    for (std::size_t k = 0; k < c; ++k) t[p * c + k] *= map[p];
  }
  return t;
}

// Adjoint of modulate with respect to the map: sums channel contributions.
inline Tensor channel_sum(const Tensor& t) {
  Tensor out(t.height(), t.width(), 1);
  const std::size_t c = t.channels();
  for (std::size_t p = 0; p < t.pixels(); ++p) {
    double acc = 0.0;
    for (std::size_t k = 0; k < c; ++k) acc += t[p * c + k];
    out[p] = acc;
  }
  return out;
}

inline Tensor channel_mean(const Tensor& t) {
  Tensor out = channel_sum(t);
  out *= 1.0 / static_cast<double>(t.channels());
  return out;
}

// Spreads a single-channel plane over `channels` identical channels.
inline Tensor broadcast_channels(const Tensor& plane, std::size_t channels) {
  Tensor out(plane.height(), plane.width(), channels);
  for (std::size_t p = 0; p < plane.pixels(); ++p) {
    for (std::size_t k = 0; k < channels; ++k) out[p * channels + k] = plane[p];
  }
  return out;
}

// Rescales to [0,1]. A constant input maps to all zeros.
inline Tensor minmax_normalize(const Tensor& t) {
  Tensor out(t.height(), t.width(), t.channels());
  if (t.empty()) return out;
  const auto [lo, hi] = std::minmax_element(t.values().begin(), t.values().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = (t[i] - *lo) / range;
  return out;
}

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return 0;
  if (static_cast<std::size_t>(i) >= n) return n - 1;
  return static_cast<std::size_t>(i);
}

// Square-window mean over a single-channel plane with edge replication.
inline Tensor box_mean(const Tensor& plane, std::size_t radius) {
  const std::size_t h = plane.height(), w = plane.width();
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const double norm = 1.0 / static_cast<double>((2 * radius + 1) * (2 * radius + 1));
  Tensor out(h, w, 1);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
        const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          acc += plane(yy, clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w));
        }
      }
      out(y, x) = acc * norm;
    }
  }
  return out;
}

// Odd-sized square kernel, correlation form, edge-replicated borders.
// Applied independently to each channel.
inline Tensor correlate_replicate(const Tensor& t, std::span<const double> kernel,
                                  std::size_t ksize) {
  const std::size_t h = t.height(), w = t.width(), c = t.channels();
  const auto r = static_cast<std::ptrdiff_t>(ksize / 2);
  Tensor out(h, w, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        double acc = 0.0;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
          const std::size_t yy =
              clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            const std::size_t xx =
                clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w);
            acc += kernel[static_cast<std::size_t>((dy + r) * (2 * r + 1) +
                                                   (dx + r))] *
                   t(yy, xx, k);
          }
        }
        out(y, x, k) = acc;
      }
    }
  }
  return out;
}

// An image proper: values in [0,1], 1 or 3 channels, sides >= 16.
class ImageTensor {
 public:
  explicit ImageTensor(Tensor t) : t_(std::move(t)) { validate(t_); }

  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              double fill)
      : ImageTensor(Tensor(height, width, channels, fill)) {}

  static void validate(const Tensor& t) {
    if (t.channels() != 1 && t.channels() != 3) {
      throw InvalidInput("image must have 1 or 3 channels, got " +
                         std::to_string(t.channels()));
    }
    if (t.height() < kMinImageSide || t.width() < kMinImageSide) {
      throw InvalidInput("image " + t.shape_string() + " is smaller than " +
                         std::to_string(kMinImageSide) + "x" +
                         std::to_string(kMinImageSide));
    }
    for (double v : t.values()) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw InvalidInput("image value outside [0,1]: " + std::to_string(v));
      }
    }
  }

  const Tensor& tensor() const { return t_; }
  operator const Tensor&() const { return t_; }  // NOLINT

  std::size_t height() const { return t_.height(); }
  std::size_t width() const { return t_.width(); }
  std::size_t channels() const { return t_.channels(); }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  Tensor t_;
};

// 8-bit-scaled luminance, values in [0,255].
struct LuminancePlane {
  Tensor values;

  std::size_t height() const { return values.height(); }
  std::size_t width() const { return values.width(); }
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// ITU-R BT.601 luma scaled to [0,255].
inline LuminancePlane to_luminance(const Tensor& img) {
  const std::size_t c = img.channels();
  if (c != 1 && c != 3) {
    throw InvalidInput("to_luminance expects 1 or 3 channels, got " +
                       std::to_string(c));
  }
  Tensor lum(img.height(), img.width(), 1);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    double v = c == 1 ? img[p]
                      : kLumaR * img[3 * p] + kLumaG * img[3 * p + 1] +
                            kLumaB * img[3 * p + 2];
    lum[p] = std::clamp(v * 255.0, 0.0, 255.0);
  }
  return {std::move(lum)};
}

}  // namespace impasto

#endif  // IMPASTO_TENSOR_HPP_
