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

// Counter-based pseudo-random values. Entry i of a seeded stream is a pure
// function of (seed, i), so large fixed projections can be regenerated on
// demand instead of stored, and results are identical on every platform.

#ifndef IMPASTO_DETAIL_RANDOM_HPP_
#define IMPASTO_DETAIL_RANDOM_HPP_

#include <cstdint>
#include <string_view>

namespace impasto::detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

// Uniform in [-1, 1).
inline double uniform_pm1(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t bits = splitmix64(seed ^ splitmix64(index)) >> 11;
  return static_cast<double>(bits) * 0x1.0p-52 - 1.0;
}

// FNV-1a, used to derive a stream seed from a text prompt.
inline constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace impasto::detail

#endif  // IMPASTO_DETAIL_RANDOM_HPP_
