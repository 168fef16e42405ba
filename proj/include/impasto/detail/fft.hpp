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

// Thin RAII layer over FFTW's real 2-D transforms.

#ifndef IMPASTO_DETAIL_FFT_HPP_
#define IMPASTO_DETAIL_FFT_HPP_

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <functional>
#include <mutex>

#include "impasto/error.hpp"
#include "impasto/tensor.hpp"

namespace impasto::detail {

// FFTW's planner is not reentrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
    if (!ptr) throw Error("fftw_malloc failed");
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

// Multiplies the 2-D DFT of a single-channel plane by a real transfer
// function and returns the inverse transform. `gain(ky, kx)` receives signed
// integer frequency indices, ky in [-H/2, H/2], kx in [0, W/2]; it must be
// even in (ky, kx) so the filtered signal stays real.
inline Tensor filter_real_2d(const Tensor& plane,
                             const std::function<double(long, long)>& gain) {
  const std::size_t h = plane.height(), w = plane.width();
  const std::size_t wc = w / 2 + 1;
  FftwBuffer spatial(sizeof(double) * h * w);
  FftwBuffer spectrum(sizeof(fftw_complex) * h * wc);
  auto* in = static_cast<double*>(spatial.ptr);
  auto* freq = static_cast<fftw_complex*>(spectrum.ptr);

  fftw_plan forward, backward;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_2d(static_cast<int>(h), static_cast<int>(w), in,
                                   freq, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(static_cast<int>(h), static_cast<int>(w),
                                    freq, in, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < h * w; ++i) in[i] = plane[i];
  fftw_execute(forward);
  for (std::size_t y = 0; y < h; ++y) {
    const long ky = y <= h / 2 ? static_cast<long>(y)
                               : static_cast<long>(y) - static_cast<long>(h);
    for (std::size_t x = 0; x < wc; ++x) {
      const double g = gain(ky, static_cast<long>(x));
      freq[y * wc + x][0] *= g;
      freq[y * wc + x][1] *= g;
    }
  }
  fftw_execute(backward);
  Tensor out(h, w, 1);
  const double norm = 1.0 / static_cast<double>(h * w);
  for (std::size_t i = 0; i < h * w; ++i) out[i] = in[i] * norm;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  return out;
}

}  // namespace impasto::detail

#endif  // IMPASTO_DETAIL_FFT_HPP_
