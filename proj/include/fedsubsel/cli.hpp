#pragma once

// Command-line driver: run, sweep, verify, gen-data.
//
// Exit codes: 0 success, 1 runtime failure (or failed verification),
// 2 configuration/usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsubsel/error.hpp"
#include "fedsubsel/experiment.hpp"
#include "fedsubsel/idx.hpp"
#include "fedsubsel/suites.hpp"

namespace fedsubsel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr const char* kSeedEnv = "FEDSUBSEL_SEED";

struct Overrides {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::size_t repeat = 0;
  std::size_t threads = 0;
};

inline ExperimentConfig load_config(const Overrides& o) {
  std::ifstream in(o.config);
  if (!in) throw ConfigError("--config", "cannot read '" + o.config + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg = parse_config_text(ss.str());
  if (const char* env = std::getenv(kSeedEnv)) {
    try {
      std::size_t used = 0;
      const std::string s(env);
      const auto v = std::stoull(s, &used);
      if (used != s.size() || s.empty() || s[0] == '-') throw std::invalid_argument(s);
      cfg.train.seed = v;
    } catch (const std::exception&) {
      throw ConfigError(kSeedEnv, "expected an unsigned 64-bit integer, got '" + std::string(env) + "'");
    }
  }
  if (o.has_seed) cfg.train.seed = o.seed;
  if (o.repeat) cfg.repeat = o.repeat;
  if (o.threads) cfg.train.threads = o.threads;
  if (!o.out.empty()) cfg.output = o.out;
  return cfg;
}

inline void emit_csv(const std::string& path, const std::vector<ResultRow>& rows, std::ostream& out) {
  if (path.empty()) {
    write_csv(out, rows);
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(f, rows);
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline void print_suite(const SuiteResult& r, std::ostream& out) {
  out << (r.passed() ? "PASS " : "FAIL ") << r.name << ": " << r.checks << " checks, " << r.failures.size()
      << " failures (" << r.seconds << " s)\n";
  const std::size_t shown = std::min<std::size_t>(r.failures.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) out << "  " << r.failures[i] << '\n';
  if (r.failures.size() > shown) out << "  ... " << r.failures.size() - shown << " more\n";
}

inline std::vector<SuiteResult> run_suite(const std::string& name) {
  if (name == "submodularity") return {submodularity_suite(), union_modularity_suite()};
  if (name == "greedy_bound") return {greedy_bound_suite()};
  if (name == "gradients") return {gradient_suite()};
  if (name == "partition") return {partition_suite()};
  throw ConfigError("--suite", "unknown suite '" + name + "'");
}

inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Fairness-aware federated client selection simulator"};
  app.require_subcommand(1);

  Overrides o;
  std::string param, values, suite;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required();
    sub->add_option("--out", o.out, "output path");
    sub->add_option("--seed", o.seed, "base seed (overrides config and $FEDSUBSEL_SEED)")
        ->each([&](const std::string&) { o.has_seed = true; });
  };

  auto* run = app.add_subcommand("run", "run one experiment and write CSV");
  add_common(run);
  run->add_option("--repeat", o.repeat, "number of seeds");
  run->add_option("--threads", o.threads, "worker threads");

  auto* sweep = app.add_subcommand("sweep", "run one experiment per parameter value");
  add_common(sweep);
  sweep->add_option("--repeat", o.repeat, "number of seeds");
  sweep->add_option("--threads", o.threads, "worker threads");
  sweep->add_option("--param", param, "lambda | window | phi | b | mu")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();

  auto* verify = app.add_subcommand("verify", "run a property suite");
  verify->add_option("--suite", suite, "submodularity | greedy_bound | gradients | partition")->required();

  auto* gen = app.add_subcommand("gen-data", "write the configured synthetic dataset as IDX files");
  add_common(gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*run) {
      const ExperimentConfig cfg = load_config(o);
      emit_csv(cfg.output, run_experiment(cfg), out);
      return kExitOk;
    }
    if (*sweep) {
      const ExperimentConfig cfg = load_config(o);
      const auto p = parse_sweep_param(param);
      if (!p) throw ConfigError("--param", "unknown parameter '" + param + "'");
      emit_csv(cfg.output, run_sweep(cfg, *p, split_list(values)), out);
      return kExitOk;
    }
    if (*verify) {
      bool ok = true;
      for (const auto& r : run_suite(suite)) {
        print_suite(r, out);
        ok = ok && r.passed();
      }
      return ok ? kExitOk : kExitRuntime;
    }
    if (*gen) {
      const ExperimentConfig cfg = load_config(o);
      if (cfg.data.kind != DatasetKind::synthetic) throw ConfigError("/dataset/kind", "gen-data needs a synthetic dataset");
      if (o.out.empty()) throw ConfigError("--out", "gen-data needs an output directory");
      std::filesystem::create_directories(o.out);
      const IdxPair pair = to_idx(load_dataset(cfg.data, cfg.train.seed));
      const auto dir = std::filesystem::path(o.out);
      write_idx((dir / "images-idx3-ubyte").string(), pair.images);
      write_idx((dir / "labels-idx1-ubyte").string(), pair.labels);
      out << "wrote " << pair.images.count() << " rows to " << dir.string() << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace fedsubsel::cli
