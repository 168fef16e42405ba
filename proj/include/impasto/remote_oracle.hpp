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

// Client for an out-of-process oracle worker speaking the wire protocol.
//
// Endpoints are "host:port" for TCP or "unix:/path" (or any string
// containing '/') for a local socket. One connection, one request in flight;
// calls from several threads are serialized.

#ifndef IMPASTO_REMOTE_ORACLE_HPP_
#define IMPASTO_REMOTE_ORACLE_HPP_

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "impasto/detail/random.hpp"
#include "impasto/error.hpp"
#include "impasto/oracle.hpp"
#include "impasto/tensor.hpp"
#include "impasto/wire.hpp"

namespace impasto::oracle {

struct Endpoint {
  enum class Kind { kTcp, kUnix } kind = Kind::kTcp;
  std::string host;
  std::string port;
  std::string path;

  static Endpoint parse(std::string_view s) {
    Endpoint e;
    if (s.starts_with("unix:")) {
      e.kind = Kind::kUnix;
      e.path = std::string(s.substr(5));
    } else if (s.find('/') != std::string_view::npos) {
      e.kind = Kind::kUnix;
      e.path = std::string(s);
    } else {
      const auto colon = s.rfind(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size()) {
        throw InvalidConfig("endpoint '" + std::string(s) +
                            "' is neither host:port nor a socket path");
      }
      e.host = std::string(s.substr(0, colon));
      e.port = std::string(s.substr(colon + 1));
      for (char c : e.port) {
        if (c < '0' || c > '9') throw InvalidConfig("bad port in '" + std::string(s) + "'");
      }
    }
    if (e.kind == Kind::kUnix && e.path.empty()) {
      throw InvalidConfig("empty socket path");
    }
    return e;
  }
};

class SocketConnection {
 public:
  SocketConnection(const Endpoint& ep, double timeout_seconds) {
    if (ep.kind == Endpoint::Kind::kUnix) {
      sockaddr_un addr{};
      if (ep.path.size() >= sizeof(addr.sun_path)) throw InvalidConfig("socket path too long");
      fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
      if (fd_ < 0) throw OracleError(errno_message("socket"));
      addr.sun_family = AF_UNIX;
      std::memcpy(addr.sun_path, ep.path.c_str(), ep.path.size() + 1);
      if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        const std::string msg = errno_message("connect " + ep.path);
        close();
        throw OracleError(msg);
      }
    } else {
      addrinfo hints{};
      hints.ai_family = AF_UNSPEC;
      hints.ai_socktype = SOCK_STREAM;
      addrinfo* res = nullptr;
      if (int rc = ::getaddrinfo(ep.host.c_str(), ep.port.c_str(), &hints, &res); rc != 0) {
        throw OracleError("resolve " + ep.host + ": " + ::gai_strerror(rc));
      }
      std::string last = "no address";
      for (addrinfo* a = res; a; a = a->ai_next) {
        fd_ = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd_ < 0) continue;
        if (::connect(fd_, a->ai_addr, a->ai_addrlen) == 0) break;
        last = errno_message("connect " + ep.host + ":" + ep.port);
        close();
      }
      ::freeaddrinfo(res);
      if (fd_ < 0) throw OracleError(last);
      int one = 1;
      ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }
    if (timeout_seconds > 0.0) {
      timeval tv{};
      tv.tv_sec = static_cast<time_t>(timeout_seconds);
      tv.tv_usec = static_cast<suseconds_t>((timeout_seconds - std::floor(timeout_seconds)) * 1e6);
      ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
      ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    }
  }

  SocketConnection(const SocketConnection&) = delete;
  SocketConnection& operator=(const SocketConnection&) = delete;
  ~SocketConnection() { close(); }

  void read_exact(char* dst, std::size_t n) {
    while (n > 0) {
      const ssize_t r = ::recv(fd_, dst, n, 0);
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw OracleError(errno_message("recv"));
      if (r == 0) throw OracleError("worker closed the connection");
      dst += r;
      n -= static_cast<std::size_t>(r);
    }
  }

  void write_all(const char* src, std::size_t n) {
    while (n > 0) {
      const ssize_t r = ::send(fd_, src, n, MSG_NOSIGNAL);
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw OracleError(errno_message("send"));
      src += r;
      n -= static_cast<std::size_t>(r);
    }
  }

 private:
  static std::string errno_message(const std::string& what) {
    return what + ": " + std::strerror(errno);
  }
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  int fd_ = -1;
};

struct RemoteOptions {
  double timeout_seconds = 600.0;
  Capabilities capabilities{Capability::kLspGrad, Capability::kLpipsFeatures,
                            Capability::kClipEmbed, Capability::kDiffusionRoundtrip,
                            Capability::kSpatialDistance};
};

class RemoteOracle final : public GuidanceOracle {
 public:
  explicit RemoteOracle(std::string endpoint, RemoteOptions opt = {})
      : endpoint_text_(std::move(endpoint)),
        endpoint_(Endpoint::parse(endpoint_text_)),
        opt_(opt) {}

  std::string name() const override { return "remote(" + endpoint_text_ + ")"; }
  Capabilities capabilities() const override { return opt_.capabilities; }

  LspValue eval_lsp(const Tensor& x_hat, const LspSpec& spec,
                    std::uint64_t seed) override {
    require(Capability::kLspGrad, "eval_lsp");
    spec.validate(x_hat);
    wire::Frame req;
    req.header = {{"op", "eval_lsp"},
                  {"lambda_e", spec.lambda_e},
                  {"lambda_sd", spec.lambda_sd},
                  {"seed", seed},
                  {"timestep_policy",
                   spec.timestep_policy == TimestepPolicy::kFixed ? "fixed" : "uniform"},
                  {"timestep", spec.fixed_timestep}};
    req.tensors.push_back(x_hat);
    if (spec.lambda_e > 0.0) req.tensors.push_back(spec.target);
    const wire::Frame resp = call(req, 1);
    LspValue out;
    out.loss = number(resp, "loss");
    out.encoder_loss = resp.header.value("encoder_loss", 0.0);
    out.diffusion_loss = resp.header.value("diffusion_loss", 0.0);
    out.grad = shaped(resp.tensors[0], x_hat, "eval_lsp gradient");
    return out;
  }

  Tensor diffusion_roundtrip(const Tensor& x, int t, int total,
                             std::uint64_t seed) override {
    require(Capability::kDiffusionRoundtrip, "diffusion_roundtrip");
    if (t <= 0 || t > total) throw InvalidConfig("roundtrip needs 0 < t <= T");
    wire::Frame req;
    req.header = {{"op", "diffusion_roundtrip"}, {"t", t}, {"T", total}, {"seed", seed}};
    req.tensors.push_back(x);
    return shaped(call(req, 1).tensors[0], x, "roundtrip output");
  }

  Tensor spatial_distance(const Tensor& a, const Tensor& b) override {
    require(Capability::kSpatialDistance, "spatial_distance");
    a.require_same_shape(b);
    wire::Frame req;
    req.header = {{"op", "spatial_distance"}};
    req.tensors = {a, b};
    const Tensor m = call(req, 1).tensors[0];
    if (m.channels() != 1 || !m.same_extent(a)) {
      throw OracleError("distance map has shape " + m.shape_string());
    }
    return m;
  }

  LossGrad clip_alignment(const Tensor& x, std::string_view prompt) override {
    require(Capability::kClipEmbed, "clip_align");
    wire::Frame req;
    req.header = {{"op", "clip_align"}, {"prompt", std::string(prompt)}};
    req.tensors.push_back(x);
    const wire::Frame resp = call(req, 1);
    return {number(resp, "loss"), shaped(resp.tensors[0], x, "clip_align gradient")};
  }

  LossGrad masked_lpips(const Tensor& x, const Tensor& x_hat,
                        const Tensor& mask) override {
    require(Capability::kLpipsFeatures, "lpips_masked");
    x.require_same_shape(x_hat);
    if (mask.channels() != 1 || !mask.same_extent(x)) throw InvalidInput("mask shape mismatch");
    wire::Frame req;
    req.header = {{"op", "lpips_masked"}};
    req.tensors = {x, x_hat, mask};
    const wire::Frame resp = call(req, 1);
    return {number(resp, "loss"), shaped(resp.tensors[0], x_hat, "lpips_masked gradient")};
  }

  // One request, one response. Protocol or transport failures drop the
  // connection so the next call reconnects.
  wire::Frame call(const wire::Frame& request, std::size_t expected_tensors) {
    std::lock_guard<std::mutex> lock(mu_);
    wire::Frame resp;
    try {
      if (!conn_) conn_ = std::make_unique<SocketConnection>(endpoint_, opt_.timeout_seconds);
      wire::write_frame([this](const char* p, std::size_t n) { conn_->write_all(p, n); },
                        request);
      resp = wire::read_response([this](char* p, std::size_t n) { conn_->read_exact(p, n); });
    } catch (const Error&) {
      conn_.reset();
      throw;
    } catch (const std::exception& e) {
      conn_.reset();
      throw OracleError(std::string("worker exchange failed: ") + e.what());
    }
    if (resp.header["status"] == "error") {
      throw OracleError(name() + ": " + resp.header.value("message", std::string("error")));
    }
    if (resp.tensors.size() != expected_tensors) {
      throw OracleError("expected " + std::to_string(expected_tensors) +
                        " tensors, got " + std::to_string(resp.tensors.size()));
    }
    for (const Tensor& t : resp.tensors) {
      if (!all_finite(t)) throw OracleError("worker returned non-finite values");
    }
    return resp;
  }

 private:
  void require(Capability c, const char* op) const {
    if (!opt_.capabilities.has(c)) throw UnsupportedOperation(name() + ": " + op);
  }

  static double number(const wire::Frame& f, const char* key) {
    if (!f.header.contains(key) || !f.header[key].is_number()) {
      throw OracleError(std::string("response lacks numeric '") + key + "'");
    }
    const double v = f.header[key].get<double>();
    if (!std::isfinite(v)) throw OracleError(std::string("non-finite '") + key + "'");
    return v;
  }

  static Tensor shaped(const Tensor& t, const Tensor& like, const char* what) {
    if (!t.same_shape(like)) {
      throw OracleError(std::string(what) + " has shape " + t.shape_string() +
                        ", expected " + like.shape_string());
    }
    return t;
  }

  std::string endpoint_text_;
  Endpoint endpoint_;
  RemoteOptions opt_;
  std::mutex mu_;
  std::unique_ptr<SocketConnection> conn_;
};

struct SpotCheck {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

// Central-difference check of the eval_lsp gradient at `count` coordinates
// drawn from `pick_seed`. Every probe reuses `seed` so stochastic terms are
// drawn identically.
inline std::vector<SpotCheck> spot_check_lsp_gradient(
    GuidanceOracle& oracle, const Tensor& x_hat, const LspSpec& spec,
    std::uint64_t seed, std::size_t count = 8, double step = 1e-3,
    std::uint64_t pick_seed = 7) {
  if (count < 1 || x_hat.size() == 0) throw InvalidConfig("spot check needs coordinates");
  const LspValue base = oracle.eval_lsp(x_hat, spec, seed);
  std::vector<SpotCheck> out;
  for (std::size_t k = 0; k < count; ++k) {
    SpotCheck s;
    s.index = static_cast<std::size_t>(detail::splitmix64(detail::mix_seed(pick_seed, k)) %
                                       x_hat.size());
    Tensor plus = x_hat, minus = x_hat;
    plus[s.index] += step;
    minus[s.index] -= step;
    const double lp = oracle.eval_lsp(plus, spec, seed).loss;
    const double lm = oracle.eval_lsp(minus, spec, seed).loss;
    s.analytic = base.grad[s.index];
    s.numeric = (lp - lm) / (2.0 * step);
    const double scale = std::max({std::abs(s.analytic), std::abs(s.numeric), 1e-8});
    s.rel_error = std::abs(s.analytic - s.numeric) / scale;
    out.push_back(s);
  }
  return out;
}

}  // namespace impasto::oracle

#endif  // IMPASTO_REMOTE_ORACLE_HPP_
