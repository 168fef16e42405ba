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

// Shared test helpers: seeded generators, finite differences, scratch
// directories and an in-process fake worker.

#ifndef IMPASTO_TESTS_TEST_SUPPORT_HPP_
#define IMPASTO_TESTS_TEST_SUPPORT_HPP_

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "impasto/impasto.hpp"

namespace impasto::testing {

namespace fs = std::filesystem;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }

  Tensor tensor(std::size_t h, std::size_t w, std::size_t c, double lo = 0.0,
                double hi = 1.0) {
    Tensor t(h, w, c);
    for (double& v : t.values()) v = uniform(lo, hi);
    return t;
  }

  // Smooth-plus-noise image, more like a picture than white noise.
  Tensor image(std::size_t h, std::size_t w, std::size_t c) {
    Tensor t(h, w, c);
    const double fy = uniform(0.5, 3.0), fx = uniform(0.5, 3.0), ph = uniform(0.0, 6.28);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double base = 0.5 + 0.3 * std::sin(fy * y / static_cast<double>(h) * 6.28 + ph) *
                                      std::cos(fx * x / static_cast<double>(w) * 6.28);
        for (std::size_t ch = 0; ch < c; ++ch) {
          t(y, x, ch) = std::clamp(base + uniform(-0.15, 0.15), 0.0, 1.0);
        }
      }
    }
    return t;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline double rel_error(double a, double b, double floor = 1e-10) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central difference of f at coordinate i.
inline double central_difference(const std::function<double(const Tensor&)>& f,
                                 const Tensor& x, std::size_t i, double h) {
  Tensor p = x, m = x;
  p[i] += h;
  m[i] -= h;
  return (f(p) - f(m)) / (2.0 * h);
}

// Fresh scratch directory under the system temp dir, removed on scope exit.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("impasto-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

// Answers one request frame with the given oracle, mirroring what a worker
// does. Malformed requests produce error frames.
inline wire::Frame serve_request(oracle::GuidanceOracle& orc, const wire::Frame& req) {
  try {
    const std::string op = req.header.at("op").get<std::string>();
    wire::Frame resp;
    resp.header["status"] = "ok";
    const auto& t = req.tensors;
    auto need = [&](std::size_t n) {
      if (t.size() != n) throw InvalidInput(op + " expects " + std::to_string(n) + " tensors");
    };
    if (op == "eval_lsp") {
      oracle::LspSpec spec;
      spec.lambda_e = req.header.at("lambda_e").get<double>();
      spec.lambda_sd = req.header.at("lambda_sd").get<double>();
      need(spec.lambda_e > 0.0 ? 2 : 1);
      if (spec.lambda_e > 0.0) spec.target = t[1];
      const auto v = orc.eval_lsp(t[0], spec, req.header.at("seed").get<std::uint64_t>());
      resp.header["loss"] = v.loss;
      resp.header["encoder_loss"] = v.encoder_loss;
      resp.header["diffusion_loss"] = v.diffusion_loss;
      resp.tensors.push_back(v.grad);
    } else if (op == "diffusion_roundtrip") {
      need(1);
      resp.tensors.push_back(orc.diffusion_roundtrip(
          t[0], req.header.at("t").get<int>(), req.header.at("T").get<int>(),
          req.header.at("seed").get<std::uint64_t>()));
    } else if (op == "spatial_distance") {
      need(2);
      resp.tensors.push_back(orc.spatial_distance(t[0], t[1]));
    } else if (op == "clip_align") {
      need(1);
      const auto r = orc.clip_alignment(t[0], req.header.at("prompt").get<std::string>());
      resp.header["loss"] = r.loss;
      resp.tensors.push_back(r.grad);
    } else if (op == "lpips_masked") {
      need(3);
      const auto r = orc.masked_lpips(t[0], t[1], t[2]);
      resp.header["loss"] = r.loss;
      resp.tensors.push_back(r.grad);
    }
    return resp;
  } catch (const std::exception& e) {
    return wire::error_response(e.what());
  }
}

// Unix-socket server wrapping an oracle on a background thread. Each
// accepted connection is served until the peer closes it.
class FakeWorker {
 public:
  using Handler = std::function<wire::Frame(const wire::Frame&)>;

  explicit FakeWorker(Handler handler) : handler_(std::move(handler)) {
    static std::atomic<int> counter{0};
    path_ = (fs::temp_directory_path() /
             ("impasto-worker-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter++) + ".sock"))
                .string();
    ::unlink(path_.c_str());
    listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, path_.c_str(), sizeof(addr.sun_path) - 1);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 4) != 0) {
      throw IoError("fake worker cannot bind " + path_);
    }
    thread_ = std::thread([this] { loop(); });
  }

  explicit FakeWorker(oracle::GuidanceOracle& orc)
      : FakeWorker([&orc](const wire::Frame& f) { return serve_request(orc, f); }) {}

  ~FakeWorker() {
    stop_ = true;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (thread_.joinable()) thread_.join();
    ::unlink(path_.c_str());
  }

  const std::string& path() const { return path_; }
  std::string endpoint() const { return "unix:" + path_; }
  int requests() const { return requests_.load(); }
  int protocol_errors() const { return protocol_errors_.load(); }

 private:
  void loop() {
    while (!stop_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) return;
      serve(fd);
      ::close(fd);
    }
  }

  void serve(int fd) {
    auto read = [fd](char* p, std::size_t n) {
      while (n > 0) {
        const ssize_t r = ::recv(fd, p, n, 0);
        if (r <= 0) throw IoError("peer closed");
        p += r;
        n -= static_cast<std::size_t>(r);
      }
    };
    auto write = [fd](const char* p, std::size_t n) {
      while (n > 0) {
        const ssize_t r = ::send(fd, p, n, MSG_NOSIGNAL);
        if (r <= 0) throw IoError("peer closed");
        p += r;
        n -= static_cast<std::size_t>(r);
      }
    };
    for (;;) {
      wire::Frame req;
      try {
        req = wire::read_request(read);
      } catch (const wire::ProtocolError& e) {
        ++protocol_errors_;
        try {
          wire::write_frame(write, wire::error_response(e.what()));
        } catch (const std::exception&) {
          return;
        }
        // The stream position is unknown after a bad frame; drop the peer.
        return;
      } catch (const std::exception&) {
        return;
      }
      ++requests_;
      try {
        wire::write_frame(write, handler_(req));
      } catch (const std::exception&) {
        return;
      }
    }
  }

  Handler handler_;
  std::string path_;
  int listen_fd_ = -1;
  std::atomic<bool> stop_{false};
  std::atomic<int> requests_{0};
  std::atomic<int> protocol_errors_{0};
  std::thread thread_;
};

}  // namespace impasto::testing

#endif  // IMPASTO_TESTS_TEST_SUPPORT_HPP_
