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

// Lossless PNG ingestion and emission (8/16-bit, grayscale/RGB).
//
// Samples are mapped linearly: an n-bit sample s becomes s / (2^n - 1).
// No gamma or color management is applied. Palette images are expanded to
// RGB and alpha channels are dropped on read.

#ifndef IMPASTO_PNG_IO_HPP_
#define IMPASTO_PNG_IO_HPP_

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "impasto/error.hpp"
#include "impasto/tensor.hpp"

namespace impasto {

struct PngSamples {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;  // 1 or 3
  int bit_depth = 8;         // 8 or 16
  std::vector<std::uint16_t> samples;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// The setjmp-protected bodies below keep only trivially destructible locals
// alive across the jump; errors are reported through the return value.
inline bool png_read_body(std::FILE* fp, PngSamples* out, char* msg,
                          std::size_t msg_len) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    std::snprintf(msg, msg_len, "png_create_read_struct failed");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    std::snprintf(msg, msg_len, "png_create_info_struct failed");
    return false;
  }
  png_bytep* volatile rows = nullptr;
  png_bytep volatile buffer = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    png_free(png, rows);
    png_free(png, buffer);
    png_destroy_read_struct(&png, &info, nullptr);
    std::snprintf(msg, msg_len, "malformed PNG stream");
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_uint_32 width = 0, height = 0;
  int depth = 0, color = 0;
  png_get_IHDR(png, info, &width, &height, &depth, &color, nullptr, nullptr,
               nullptr);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const png_size_t rowbytes = png_get_rowbytes(png, info);
  if ((channels != 1 && channels != 3) || (out_depth != 8 && out_depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::snprintf(msg, msg_len, "unsupported PNG layout (%d channels, %d bit)",
                  channels, out_depth);
    return false;
  }

  buffer = static_cast<png_bytep>(png_malloc(png, rowbytes * height));
  rows = static_cast<png_bytep*>(png_malloc(png, sizeof(png_bytep) * height));
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer + y * rowbytes;
  png_read_image(png, rows);
  png_read_end(png, nullptr);

  out->height = height;
  out->width = width;
  out->channels = static_cast<std::size_t>(channels);
  out->bit_depth = out_depth;
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  out->samples.resize(n);
  if (out_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) out->samples[i] = buffer[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out->samples[i] =
          static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  }
  png_free(png, rows);
  png_free(png, buffer);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool png_write_body(std::FILE* fp, const PngSamples* in,
                           const png_byte* packed, char* msg,
                           std::size_t msg_len) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    std::snprintf(msg, msg_len, "png_create_write_struct failed");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    std::snprintf(msg, msg_len, "png_create_info_struct failed");
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::snprintf(msg, msg_len, "PNG encoding failed");
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(in->width),
               static_cast<png_uint_32>(in->height), in->bit_depth,
               in->channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes =
      in->width * in->channels * static_cast<std::size_t>(in->bit_depth / 8);
  for (std::size_t y = 0; y < in->height; ++y) {
    png_write_row(png, const_cast<png_bytep>(packed + y * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline PngSamples read_png_samples(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  std::rewind(fp.get());
  PngSamples out;
  char msg[256] = {0};
  if (!detail::png_read_body(fp.get(), &out, msg, sizeof(msg))) {
    throw IoError(path.string() + ": " + msg);
  }
  return out;
}

inline void write_png_samples(const std::filesystem::path& path,
                              const PngSamples& in) {
  if (in.channels != 1 && in.channels != 3) {
    throw InvalidInput("PNG output needs 1 or 3 channels");
  }
  if (in.bit_depth != 8 && in.bit_depth != 16) {
    throw InvalidInput("PNG output bit depth must be 8 or 16");
  }
  if (in.samples.size() != in.height * in.width * in.channels) {
    throw InvalidInput("PNG sample count does not match shape");
  }
  std::vector<png_byte> packed;
  if (in.bit_depth == 8) {
    packed.resize(in.samples.size());
    for (std::size_t i = 0; i < in.samples.size(); ++i) {
      packed[i] = static_cast<png_byte>(std::min<std::uint16_t>(in.samples[i], 255));
    }
  } else {
    packed.resize(in.samples.size() * 2);
    for (std::size_t i = 0; i < in.samples.size(); ++i) {
      packed[2 * i] = static_cast<png_byte>(in.samples[i] >> 8);
      packed[2 * i + 1] = static_cast<png_byte>(in.samples[i] & 0xFF);
    }
  }
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot create " + path.string());
  char msg[256] = {0};
  if (!detail::png_write_body(fp.get(), &in, packed.data(), msg, sizeof(msg))) {
    throw IoError(path.string() + ": " + msg);
  }
  if (std::fflush(fp.get()) != 0) throw IoError("write failed: " + path.string());
}

inline Tensor samples_to_tensor(const PngSamples& s) {
  const double maxv = s.bit_depth == 16 ? 65535.0 : 255.0;
  Tensor t(s.height, s.width, s.channels);
  for (std::size_t i = 0; i < s.samples.size(); ++i) t[i] = s.samples[i] / maxv;
  return t;
}

// Values are clamped to [0,1] and rounded to the nearest code.
inline PngSamples tensor_to_samples(const Tensor& t, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw InvalidInput("bit depth must be 8 or 16");
  }
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  PngSamples s{t.height(), t.width(), t.channels(), bit_depth, {}};
  s.samples.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = std::clamp(t[i], 0.0, 1.0);
    s.samples[i] = static_cast<std::uint16_t>(std::lround(v * maxv));
  }
  return s;
}

inline Tensor read_png(const std::filesystem::path& path) {
  return samples_to_tensor(read_png_samples(path));
}

inline ImageTensor load_image(const std::filesystem::path& path) {
  return ImageTensor(read_png(path));
}

// 16-bit output keeps perturbations below the 8-bit step; 8-bit output
// quantizes to 1/255 and can move a pixel by up to half a step.
inline void write_png(const std::filesystem::path& path, const Tensor& t,
                      int bit_depth = 16) {
  write_png_samples(path, tensor_to_samples(t, bit_depth));
}

// Signed perturbations stored as 16-bit offsets: code 32768 is zero and one
// code unit is 1/32767, so the representable range is [-32768/32767, 1].
inline constexpr double kDeltaUnit = 32767.0;
inline constexpr std::uint16_t kDeltaZero = 32768;

inline PngSamples encode_delta(const Tensor& delta) {
  PngSamples s{delta.height(), delta.width(), delta.channels(), 16, {}};
  s.samples.resize(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const long code = kDeltaZero + std::lround(delta[i] * kDeltaUnit);
    s.samples[i] = static_cast<std::uint16_t>(std::clamp(code, 0L, 65535L));
  }
  return s;
}

inline Tensor decode_delta(const PngSamples& s) {
  Tensor t(s.height, s.width, s.channels);
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    t[i] = (static_cast<double>(s.samples[i]) - kDeltaZero) / kDeltaUnit;
  }
  return t;
}

}  // namespace impasto

#endif  // IMPASTO_PNG_IO_HPP_
