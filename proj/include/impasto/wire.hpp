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

// Framing for the oracle worker protocol.
//
//   u32 LE header length | UTF-8 JSON header | payload
//
// The payload is the concatenation of the tensors listed in header["shapes"]
// ([h, w, c] each), stored row-major, channel-last, as float32 LE. Requests
// carry header["op"]; responses carry header["status"] ("ok" or "error",
// with header["message"] and no payload on error).

#ifndef IMPASTO_WIRE_HPP_
#define IMPASTO_WIRE_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "impasto/error.hpp"
#include "impasto/tensor.hpp"

namespace impasto::wire {

using Json = nlohmann::json;

// Malformed frames, unknown ops, shape and length mismatches.
class ProtocolError : public OracleError {
 public:
  using OracleError::OracleError;
};

inline constexpr std::array<std::string_view, 5> kOps = {
    "eval_lsp", "diffusion_roundtrip", "spatial_distance", "clip_align",
    "lpips_masked"};

inline bool known_op(std::string_view op) {
  return std::find(kOps.begin(), kOps.end(), op) != kOps.end();
}

inline constexpr std::uint32_t kMaxHeaderBytes = 1u << 20;
inline constexpr std::uint64_t kMaxPayloadBytes = 1ull << 32;

struct Frame {
  Json header = Json::object();
  std::vector<Tensor> tensors;
};

// Reads exactly n bytes or throws; writes all n bytes or throws.
using ReadFn = std::function<void(char*, std::size_t)>;
using WriteFn = std::function<void(const char*, std::size_t)>;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::array<std::size_t, 3> parse_shape(const Json& s) {
  if (!s.is_array() || s.size() != 3) throw ProtocolError("shape must be [h, w, c]");
  std::array<std::size_t, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!s[i].is_number_unsigned() && !(s[i].is_number_integer() && s[i].get<long long>() >= 0)) {
      throw ProtocolError("shape entries must be non-negative integers");
    }
    out[i] = s[i].get<std::size_t>();
  }
  return out;
}

}  // namespace detail

// Byte length the header's "shapes" imply: sum of shape products times 4.
inline std::uint64_t payload_bytes(const Json& header) {
  if (!header.contains("shapes")) return 0;
  const Json& shapes = header["shapes"];
  if (!shapes.is_array()) throw ProtocolError("'shapes' must be an array");
  std::uint64_t total = 0;
  for (const Json& s : shapes) {
    const auto d = detail::parse_shape(s);
    const std::uint64_t n = static_cast<std::uint64_t>(d[0]) * d[1] * d[2];
    if (d[0] != 0 && n / d[0] != static_cast<std::uint64_t>(d[1]) * d[2]) {
      throw ProtocolError("shape product overflows");
    }
    total += n * 4;
    if (total > kMaxPayloadBytes) throw ProtocolError("payload too large");
  }
  return total;
}

// Serializes a frame; header["shapes"] is overwritten from the tensors.
inline std::string encode_frame(const Frame& f) {
  Json header = f.header;
  Json shapes = Json::array();
  for (const Tensor& t : f.tensors) {
    shapes.push_back({t.height(), t.width(), t.channels()});
  }
  header["shapes"] = shapes;
  const std::string h = header.dump();
  if (h.size() > kMaxHeaderBytes) throw ProtocolError("header too large");
  std::string out;
  std::size_t n = 0;
  for (const Tensor& t : f.tensors) n += t.size();
  out.reserve(4 + h.size() + 4 * n);
  detail::put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  for (const Tensor& t : f.tensors) {
    for (double v : t.values()) {
      const float fv = static_cast<float>(v);
      detail::put_u32(out, std::bit_cast<std::uint32_t>(fv));
    }
  }
  return out;
}

inline void write_frame(const WriteFn& write, const Frame& f) {
  const std::string bytes = encode_frame(f);
  write(bytes.data(), bytes.size());
}

// Reads the length prefix and JSON header only.
inline Json read_header(const ReadFn& read) {
  unsigned char len[4];
  read(reinterpret_cast<char*>(len), 4);
  const std::uint32_t n = detail::get_u32(len);
  if (n == 0 || n > kMaxHeaderBytes) {
    throw ProtocolError("bad header length " + std::to_string(n));
  }
  std::string text(n, '\0');
  read(text.data(), n);
  Json header = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (header.is_discarded() || !header.is_object()) {
    throw ProtocolError("header is not a JSON object");
  }
  return header;
}

inline std::vector<Tensor> read_payload(const ReadFn& read, const Json& header) {
  const std::uint64_t bytes = payload_bytes(header);
  std::vector<Tensor> out;
  if (bytes == 0) {
    if (header.contains("shapes")) {
      for (const Json& s : header["shapes"]) {
        const auto d = detail::parse_shape(s);
        out.emplace_back(d[0], d[1], d[2]);
      }
    }
    return out;
  }
  std::vector<unsigned char> raw(static_cast<std::size_t>(bytes));
  read(reinterpret_cast<char*>(raw.data()), raw.size());
  std::size_t off = 0;
  for (const Json& s : header["shapes"]) {
    const auto d = detail::parse_shape(s);
    Tensor t(d[0], d[1], d[2]);
    for (std::size_t i = 0; i < t.size(); ++i, off += 4) {
      t[i] = static_cast<double>(std::bit_cast<float>(detail::get_u32(raw.data() + off)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Request side: the op is checked before any payload byte is consumed.
inline Frame read_request(const ReadFn& read) {
  Frame f;
  f.header = read_header(read);
  if (!f.header.contains("op") || !f.header["op"].is_string()) {
    throw ProtocolError("request header lacks 'op'");
  }
  const std::string op = f.header["op"].get<std::string>();
  if (!known_op(op)) throw ProtocolError("unknown op '" + op + "'");
  f.tensors = read_payload(read, f.header);
  return f;
}

// Response side: status must be "ok" or "error"; errors carry no payload.
inline Frame read_response(const ReadFn& read) {
  Frame f;
  f.header = read_header(read);
  if (!f.header.contains("status") || !f.header["status"].is_string()) {
    throw ProtocolError("response header lacks 'status'");
  }
  const std::string status = f.header["status"].get<std::string>();
  if (status != "ok" && status != "error") {
    throw ProtocolError("bad status '" + status + "'");
  }
  if (status == "error" && payload_bytes(f.header) != 0) {
    throw ProtocolError("error response carries a payload");
  }
  f.tensors = read_payload(read, f.header);
  return f;
}

// In-memory helpers, mostly for tests.
inline ReadFn string_reader(const std::string& buf, std::size_t& pos) {
  return [&buf, &pos](char* dst, std::size_t n) {
    if (buf.size() - pos < n) throw ProtocolError("truncated frame");
    std::memcpy(dst, buf.data() + pos, n);
    pos += n;
  };
}

inline Frame decode_request(const std::string& bytes) {
  std::size_t pos = 0;
  Frame f = read_request(string_reader(bytes, pos));
  if (pos != bytes.size()) throw ProtocolError("trailing bytes after frame");
  return f;
}

inline Frame decode_response(const std::string& bytes) {
  std::size_t pos = 0;
  Frame f = read_response(string_reader(bytes, pos));
  if (pos != bytes.size()) throw ProtocolError("trailing bytes after frame");
  return f;
}

inline Frame error_response(std::string_view message) {
  Frame f;
  f.header = {{"status", "error"}, {"message", std::string(message)}};
  return f;
}

}  // namespace impasto::wire

#endif  // IMPASTO_WIRE_HPP_
