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

// Command-line frontend. Kept in a header so tests can drive run_cli()
// in-process.
//
//   impasto protect --input a.png [--input b.png ...] [--target grid|y.png]
//                   [--preset photoguard] [--eta 8/255] [--alpha 2/255]
//                   [--steps 100] [--interval 4] [--oracle surrogate|remote]
//                   [--endpoint host:port] [--seed 0] [--config run.json]
//                   [--jobs N] [--bit-depth 16] --out DIR
//   impasto maps --input a.png [--ppd 32] --out DIR
//   impasto diff --a a.png --b b.png [--gain 1] --out diff.png
//
// Exit status: 0 success, 1 some image failed, 2 bad arguments.

#ifndef IMPASTO_TOOLS_CLI_APP_HPP_
#define IMPASTO_TOOLS_CLI_APP_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "impasto/impasto.hpp"

namespace impasto::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitBadArgs = 2;
inline constexpr const char* kEndpointEnv = "IMPASTO_ENDPOINT";

// Accepts plain reals and "a/b" fractions such as 8/255.
inline double parse_real(const std::string& s) {
  auto one = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw InvalidConfig("not a number: '" + s + "'");
    }
    if (used != t.size()) throw InvalidConfig("not a number: '" + s + "'");
    return v;
  };
  const auto slash = s.find('/');
  if (slash == std::string::npos) return one(s);
  const double den = one(s.substr(slash + 1));
  if (den == 0.0) throw InvalidConfig("zero denominator in '" + s + "'");
  return one(s.substr(0, slash)) / den;
}

struct RunManifest {
  std::vector<fs::path> inputs;
  std::string target = "grid";
  protect::ProtectionConfig config;
  std::string oracle_mode = "surrogate";
  std::string endpoint;
  fs::path out_dir;
  int bit_depth = 16;
  unsigned jobs = 1;
};

inline std::unique_ptr<oracle::GuidanceOracle> make_oracle(const RunManifest& m) {
  if (m.oracle_mode == "remote") return std::make_unique<oracle::RemoteOracle>(m.endpoint);
  return std::make_unique<oracle::SurrogateOracle>();
}

inline Json trace_json(const protect::TraceEntry& e) {
  return Json{{"step", e.step},       {"lsp", e.lsp},
              {"encoder", e.encoder_loss}, {"diffusion", e.diffusion_loss},
              {"penalty", e.penalty}, {"lpips", e.lpips},
              {"lowpass", e.lowpass}, {"clip", e.clip},
              {"objective", e.objective}, {"linf", e.linf},
              {"iwr", e.iwr},         {"dap", e.dap}};
}

// Map in [0,1] (or any range, clamped) as 8-bit grayscale.
inline void write_map(const fs::path& p, const Tensor& map) { write_png(p, map, 8); }

inline Json protect_one(const RunManifest& m, const fs::path& input,
                        std::uint64_t image_seed, std::ostream& log,
                        std::mutex& log_mu) {
  Json rec{{"input", input.string()}, {"seed", image_seed}};
  const fs::path dir = m.out_dir / input.stem();
  try {
    const ImageTensor x = load_image(input);
    Tensor y;
    if (m.target == "grid") {
      y = protect::make_grid_target(x.height(), x.width(), x.channels());
    } else {
      y = read_png(m.target);
      if (!y.same_shape(x)) {
        throw InvalidInput("target " + y.shape_string() + " does not match " +
                           x.tensor().shape_string());
      }
    }
    const ImageTensor target(std::move(y));
    fs::create_directories(dir);

    protect::ProtectionConfig cfg = m.config;
    cfg.seed = image_seed;
    auto orc = make_oracle(m);

    std::ofstream trace(dir / "trace.jsonl");
    std::ofstream omega(dir / "omega.log");
    protect::RunHooks hooks;
    hooks.on_step = [&](const protect::TraceEntry& e) {
      trace << trace_json(e).dump() << '\n';
      trace.flush();
    };
    hooks.on_warning = [&](std::string_view w) {
      std::lock_guard<std::mutex> lock(log_mu);
      log << "warning: " << input.string() << ": " << w << '\n';
    };
    hooks.omega_log = &omega;

    const protect::ProtectionResult r = protect::protect_run(x, target, cfg, *orc, hooks);

    write_png(dir / "protected.png", r.protected_image, m.bit_depth);
    write_png_samples(dir / "delta.png", encode_delta(r.delta));
    write_map(dir / "strength.png", r.perceptual_map);
    write_map(dir / "difficulty.png", r.difficulty_map);
    write_map(dir / "sensitivity.png", r.sensitivity);

    rec["status"] = "ok";
    rec["output_dir"] = dir.string();
    rec["initial_lsp"] = r.trace.front().lsp;
    rec["final_lsp"] = r.trace.back().lsp;
    rec["linf"] = max_abs(r.delta);
    rec["iwr_events"] = r.iwr_events;
    rec["dap_events"] = r.dap_events;
    rec["omega"] = r.omega.omega;
    rec["weights"] = r.omega.weights();
    rec["wall_seconds"] = r.wall_seconds;
  } catch (const std::exception& e) {
    rec["status"] = "error";
    rec["error"] = e.what();
    std::lock_guard<std::mutex> lock(log_mu);
    log << "error: " << input.string() << ": " << e.what() << '\n';
  }
  return rec;
}

inline Json manifest_json(const RunManifest& m) {
  Json inputs = Json::array();
  for (const auto& p : m.inputs) inputs.push_back(p.string());
  return Json{{"inputs", inputs},
              {"target", m.target},
              {"preset", std::string(protect::preset_name(m.config.preset))},
              {"oracle", m.oracle_mode},
              {"endpoint", m.endpoint},
              {"out", m.out_dir.string()},
              {"bit_depth", m.bit_depth},
              {"config", protect::config_to_json(m.config)}};
}

// Returns the exit status. All inputs are checked before anything is
// written.
inline int cmd_protect(const RunManifest& m, std::ostream& out, std::ostream& err) {
  std::set<std::string> stems;
  for (const auto& p : m.inputs) {
    if (!fs::is_regular_file(p)) {
      err << "error: input not found: " << p.string() << '\n';
      return kExitBadArgs;
    }
    if (!stems.insert(p.stem().string()).second) {
      err << "error: two inputs share the name '" << p.stem().string() << "'\n";
      return kExitBadArgs;
    }
  }
  if (m.target != "grid" && !fs::is_regular_file(m.target)) {
    err << "error: target not found: " << m.target << '\n';
    return kExitBadArgs;
  }
  if (m.oracle_mode == "remote" && m.endpoint.empty()) {
    err << "error: remote oracle needs --endpoint or " << kEndpointEnv << '\n';
    return kExitBadArgs;
  }
  std::error_code ec;
  fs::create_directories(m.out_dir, ec);
  if (ec || !fs::is_directory(m.out_dir)) {
    err << "error: cannot create output directory " << m.out_dir.string() << '\n';
    return kExitBadArgs;
  }

  std::vector<Json> records(m.inputs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < m.inputs.size(); i = next++) {
      const std::uint64_t seed = detail::mix_seed(
          m.config.seed, detail::hash_string(m.inputs[i].stem().string()));
      records[i] = protect_one(m, m.inputs[i], seed, err, log_mu);
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(m.jobs, static_cast<unsigned>(m.inputs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Json summary = manifest_json(m);
  summary["images"] = records;
  std::size_t failed = 0;
  for (const Json& r : records) failed += r["status"] != "ok";
  summary["failed"] = failed;
  std::ofstream(m.out_dir / "summary.json") << std::setw(2) << summary << '\n';
  out << "protected " << (m.inputs.size() - failed) << "/" << m.inputs.size()
      << " image(s) into " << m.out_dir.string() << '\n';
  return failed == 0 ? kExitOk : kExitPartial;
}

inline int cmd_maps(const fs::path& input, double ppd, const fs::path& out_dir,
                    std::ostream& out) {
  const ImageTensor img = load_image(input);
  jnd::JndOptions opt;
  opt.pixels_per_degree = ppd;
  const jnd::JndBank bank = jnd::compute_bank(img, opt);
  fs::create_directories(out_dir);
  std::vector<Tensor> sens;
  for (std::size_t k = 0; k < bank.raw.size(); ++k) {
    const std::string name(jnd::kind_name(bank.raw[k].kind));
    write_map(out_dir / (name + ".png"), minmax_normalize(bank.raw[k].values));
    sens.push_back(bank.sensitivity[k].values);
  }
  const Tensor avg = fusion::fuse_maps(sens);
  write_map(out_dir / "average.png", avg);
  write_map(out_dir / "quantized.png", jnd::quantize_strength({avg}).values);
  out << "wrote " << bank.raw.size() + 2 << " maps to " << out_dir.string() << '\n';
  return kExitOk;
}

inline Tensor difference_map(const Tensor& a, const Tensor& b, double gain) {
  a.require_same_shape(b);
  Tensor d = a;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = std::clamp(std::abs(a[i] - b[i]) * gain, 0.0, 1.0);
  }
  return d;
}

inline int cmd_diff(const fs::path& a, const fs::path& b, double gain,
                    const fs::path& out_path, int bit_depth, std::ostream& out) {
  const Tensor d = difference_map(read_png(a), read_png(b), gain);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_png(out_path, d, bit_depth);
  out << "wrote " << out_path.string() << '\n';
  return kExitOk;
}

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perceptual adversarial protection for artwork"};
  app.require_subcommand(1);

  // protect
  auto* prot = app.add_subcommand("protect", "protect images against style imitation");
  std::vector<std::string> inputs;
  std::string target = "grid", preset, eta, alpha, oracle_mode = "surrogate", endpoint,
              out_dir, config_path;
  int steps = 0, interval = 0, bit_depth = 16;
  std::uint64_t seed = 0;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  prot->add_option("--input,-i", inputs, "input PNG(s)")->required();
  prot->add_option("--target", target, "target PNG or 'grid'");
  auto* o_preset = prot->add_option("--preset", preset, "photoguard|advdm|mist|anti-db|diff-protect");
  auto* o_eta = prot->add_option("--eta", eta, "L-inf budget in [0,1] units, e.g. 8/255");
  auto* o_alpha = prot->add_option("--alpha", alpha, "step length, e.g. 2/255");
  auto* o_steps = prot->add_option("--steps", steps, "PGD steps N");
  auto* o_interval = prot->add_option("--interval", interval, "refinement interval P");
  prot->add_option("--oracle", oracle_mode, "surrogate|remote")
      ->check(CLI::IsMember({"surrogate", "remote"}));
  prot->add_option("--endpoint", endpoint, "worker endpoint host:port or socket path");
  auto* o_seed = prot->add_option("--seed", seed, "run seed");
  prot->add_option("--out,-o", out_dir, "output directory")->required();
  prot->add_option("--config", config_path, "JSON run configuration");
  prot->add_option("--jobs,-j", jobs, "images processed in parallel")
      ->check(CLI::PositiveNumber);
  prot->add_option("--bit-depth", bit_depth, "protected PNG bit depth")
      ->check(CLI::IsMember({8, 16}));

  // maps
  auto* maps = app.add_subcommand("maps", "write the perceptual maps of an image");
  std::string maps_input, maps_out;
  double ppd = jnd::kDefaultPixelsPerDegree;
  maps->add_option("--input,-i", maps_input, "input PNG")->required();
  maps->add_option("--ppd", ppd, "pixels per degree of visual angle")
      ->check(CLI::PositiveNumber);
  maps->add_option("--out,-o", maps_out, "output directory")->required();

  // diff
  auto* diff = app.add_subcommand("diff", "render |a - b| * gain");
  std::string diff_a, diff_b, diff_out;
  double gain = 1.0;
  int diff_depth = 8;
  diff->add_option("--a", diff_a, "first PNG")->required();
  diff->add_option("--b", diff_b, "second PNG")->required();
  diff->add_option("--gain", gain, "amplification")->check(CLI::NonNegativeNumber);
  diff->add_option("--out,-o", diff_out, "output PNG")->required();
  diff->add_option("--bit-depth", diff_depth, "output bit depth")
      ->check(CLI::IsMember({8, 16}));

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadArgs;
  }

  try {
    if (*prot) {
      RunManifest m;
      for (const auto& s : inputs) m.inputs.emplace_back(s);
      m.target = target;
      if (!config_path.empty()) m.config = protect::load_config(config_path);
      if (*o_preset) m.config.preset = protect::parse_preset(preset);
      if (*o_eta) m.config.eta = parse_real(eta);
      if (*o_alpha) m.config.alpha = parse_real(alpha);
      if (*o_steps) m.config.steps = steps;
      if (*o_interval) m.config.interval = interval;
      if (*o_seed) m.config.seed = seed;
      m.config.validate();
      m.oracle_mode = oracle_mode;
      m.endpoint = endpoint;
      if (m.endpoint.empty()) {
        if (const char* env = std::getenv(kEndpointEnv)) m.endpoint = env;
      }
      if (m.oracle_mode == "remote") oracle::Endpoint::parse(m.endpoint);
      m.out_dir = out_dir;
      m.bit_depth = bit_depth;
      m.jobs = jobs;
      return cmd_protect(m, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadArgs;
  }

  try {
    if (*maps) {
      if (!fs::is_regular_file(maps_input)) {
        err << "error: input not found: " << maps_input << '\n';
        return kExitBadArgs;
      }
      return cmd_maps(maps_input, ppd, maps_out, out);
    }
    if (*diff) {
      for (const auto& p : {diff_a, diff_b}) {
        if (!fs::is_regular_file(p)) {
          err << "error: input not found: " << p << '\n';
          return kExitBadArgs;
        }
      }
      return cmd_diff(diff_a, diff_b, gain, diff_out, diff_depth, out);
    }
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadArgs;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitPartial;
  }
  return kExitBadArgs;
}

inline int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args), std::cout, std::cerr);
}

}  // namespace impasto::cli

#endif  // IMPASTO_TOOLS_CLI_APP_HPP_
