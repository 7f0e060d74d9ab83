#pragma once

// Experiment configuration (JSON), execution across seeds, and CSV output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include <json.hpp>
#endif

#include "fedsubsel/client.hpp"
#include "fedsubsel/dataset.hpp"
#include "fedsubsel/engine.hpp"
#include "fedsubsel/error.hpp"
#include "fedsubsel/idx.hpp"
#include "fedsubsel/metrics.hpp"
#include "fedsubsel/model.hpp"
#include "fedsubsel/rng.hpp"

namespace fedsubsel {

enum class DatasetKind { synthetic, idx };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  std::size_t classes = 10;
  std::size_t dims = 20;
  std::size_t per_class = 300;
  double spread = 3.0;
  std::optional<std::uint64_t> seed;  // unset: derived from the run seed
  std::string images;
  std::string labels;
  std::size_t limit = 0;  // idx: keep only the first `limit` rows (0 = all)
};

struct ExperimentConfig {
  TrainConfig train;
  DatasetSpec data;
  PartitionSpec partition{30, 3, 0.8};
  bool scaled_learning_rate = false;
  double smoothness = 0.0;  // 0: estimate from the data
  std::size_t repeat = 1;
  std::string output;
};

namespace detail {

using nlohmann::json;

class ConfigReader {
 public:
  ConfigReader(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
    for (const auto& [k, v] : j_.items())
      if (!allowed.count(k)) throw ConfigError(path_ + "/" + k, "unknown key");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string where(const std::string& key) const { return path_ + "/" + key; }
  const json& raw(const std::string& key) const { return j_.at(key); }

  template <class T>
  void read_uint(const std::string& key, T& out, std::uint64_t min = 0) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(where(key), "expected a non-negative integer");
    const auto u = v.get<std::uint64_t>();
    if (u < min) throw ConfigError(where(key), "must be >= " + std::to_string(min));
    out = static_cast<T>(u);
  }

  void read_double(const std::string& key, double& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key), "expected a number");
    out = v.get<double>();
  }

  void read_string(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key), "expected a string");
    out = v.get<std::string>();
  }

  template <class E>
  void read_enum(const std::string& key, E& out, const std::map<std::string, E>& names) const {
    if (!has(key)) return;
    std::string s;
    read_string(key, s);
    auto it = names.find(s);
    if (it == names.end()) {
      std::string opts;
      for (const auto& [n, _] : names) opts += (opts.empty() ? "" : ", ") + n;
      throw ConfigError(where(key), "unknown value '" + s + "' (expected one of: " + opts + ")");
    }
    out = it->second;
  }

 private:
  const json& j_;
  std::string path_;
};

inline const std::map<std::string, SelectionMethod>& method_names() {
  static const std::map<std::string, SelectionMethod> m{{"subtrunc", SelectionMethod::subtrunc},
                                                        {"unionfl", SelectionMethod::unionfl},
                                                        {"divfl", SelectionMethod::divfl},
                                                        {"random", SelectionMethod::random},
                                                        {"power_of_choice", SelectionMethod::power_of_choice}};
  return m;
}

inline const std::map<std::string, PhiKind>& phi_names() {
  static const std::map<std::string, PhiKind> m{{"identity", PhiKind::identity}, {"log1p", PhiKind::log1p}};
  return m;
}

}  // namespace detail

inline std::optional<PhiKind> parse_phi(const std::string& s) {
  auto it = detail::phi_names().find(s);
  if (it == detail::phi_names().end()) return std::nullopt;
  return it->second;
}

// Parses and validates an experiment config. Unknown keys are rejected;
// errors carry the JSON-pointer path of the offending field.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::ConfigReader;
  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  ConfigReader top(j, "",
                   {"method", "rounds", "local_steps", "clients_per_round", "sample_size", "learning_rate",
                    "smoothness", "batch_size", "lambda", "b", "phi", "mu", "window", "poc_candidates", "seed",
                    "repeat", "threads", "model", "dataset", "partition", "metric", "output"});
  top.read_enum("method", t.method, detail::method_names());
  top.read_uint("rounds", t.rounds, 1);
  top.read_uint("local_steps", t.local_steps, 1);
  top.read_uint("clients_per_round", t.clients_per_round, 1);
  top.read_uint("sample_size", t.sample_size, 1);
  if (top.has("learning_rate")) {
    const auto& v = top.raw("learning_rate");
    if (v.is_string()) {
      if (v.get<std::string>() != "scaled")
        throw ConfigError("/learning_rate", "expected a positive number or \"scaled\"");
      cfg.scaled_learning_rate = true;
    } else {
      top.read_double("learning_rate", t.learning_rate);
      if (!(t.learning_rate > 0.0)) throw ConfigError("/learning_rate", "must be > 0");
    }
  }
  top.read_double("smoothness", cfg.smoothness);
  if (cfg.smoothness < 0.0) throw ConfigError("/smoothness", "must be >= 0");
  top.read_uint("batch_size", t.batch_size, 1);
  top.read_double("lambda", t.fairness.lambda);
  if (!(t.fairness.lambda >= 0.0)) throw ConfigError("/lambda", "must be >= 0");
  top.read_double("b", t.fairness.b);
  if (!(t.fairness.b > 0.0)) throw ConfigError("/b", "must be > 0");
  top.read_enum("phi", t.fairness.phi, detail::phi_names());
  top.read_double("mu", t.unions.mu);
  if (!(t.unions.mu >= 0.0)) throw ConfigError("/mu", "must be >= 0");
  top.read_uint("window", t.unions.window, 1);
  top.read_uint("poc_candidates", t.poc_candidates);
  top.read_uint("seed", t.seed);
  top.read_uint("repeat", cfg.repeat, 1);
  top.read_uint("threads", t.threads, 1);
  top.read_enum("metric", t.metric,
                std::map<std::string, DissimilarityKind>{{"std", DissimilarityKind::std},
                                                         {"range", DissimilarityKind::range},
                                                         {"mean_pairwise", DissimilarityKind::mean_pairwise}});
  top.read_string("output", cfg.output);

  if (top.has("model")) {
    ConfigReader m(top.raw("model"), "/model", {"kind", "hidden"});
    m.read_enum("kind", t.model_kind, std::map<std::string, ModelKind>{{"logistic", ModelKind::logistic}, {"mlp", ModelKind::mlp}});
    m.read_uint("hidden", t.hidden, 1);
  }
  if (top.has("dataset")) {
    ConfigReader d(top.raw("dataset"), "/dataset",
                   {"kind", "classes", "dims", "per_class", "spread", "seed", "images", "labels", "limit"});
    d.read_enum("kind", cfg.data.kind,
                std::map<std::string, DatasetKind>{{"synthetic", DatasetKind::synthetic}, {"idx", DatasetKind::idx}});
    d.read_uint("classes", cfg.data.classes, 2);
    d.read_uint("dims", cfg.data.dims, 2);
    d.read_uint("per_class", cfg.data.per_class, 2);
    d.read_double("spread", cfg.data.spread);
    if (!(cfg.data.spread >= 0.0)) throw ConfigError("/dataset/spread", "must be >= 0");
    if (d.has("seed")) {
      std::uint64_t s = 0;
      d.read_uint("seed", s);
      cfg.data.seed = s;
    }
    d.read_string("images", cfg.data.images);
    d.read_string("labels", cfg.data.labels);
    d.read_uint("limit", cfg.data.limit);
    if (cfg.data.kind == DatasetKind::idx && (cfg.data.images.empty() || cfg.data.labels.empty()))
      throw ConfigError("/dataset", "idx datasets need both 'images' and 'labels' paths");
  }
  if (top.has("partition")) {
    ConfigReader p(top.raw("partition"), "/partition", {"clients", "classes_per_client", "train_fraction"});
    p.read_uint("clients", cfg.partition.n_clients, 1);
    p.read_uint("classes_per_client", cfg.partition.classes_per_client, 1);
    p.read_double("train_fraction", cfg.partition.train_fraction);
    if (!(cfg.partition.train_fraction > 0.0 && cfg.partition.train_fraction < 1.0))
      throw ConfigError("/partition/train_fraction", "must lie in (0, 1)");
  }
  if (t.clients_per_round > cfg.partition.n_clients)
    throw ConfigError("/clients_per_round", "exceeds the number of clients");
  if (t.method == SelectionMethod::power_of_choice) {
    const std::size_t d = t.power_of_choice_candidates();
    if (d < t.clients_per_round || d > cfg.partition.n_clients)
      throw ConfigError("/poc_candidates", "must lie in [clients_per_round, clients]");
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

// Dataset for one run seed.
inline LabeledDataset load_dataset(const DatasetSpec& spec, std::uint64_t run_seed) {
  if (spec.kind == DatasetKind::synthetic) {
    const std::uint64_t s = spec.seed ? *spec.seed : derive_seed(run_seed, {0xda7a});
    return generate_synthetic(spec.classes, spec.dims, spec.per_class, spec.spread, s);
  }
  LabeledDataset ds = pair_idx(read_idx(spec.images), read_idx(spec.labels));
  if (spec.limit && spec.limit < ds.rows) {
    std::vector<std::size_t> keep(spec.limit);
    for (std::size_t i = 0; i < spec.limit; ++i) keep[i] = i;
    const std::size_t classes = ds.classes;
    ds = ds.subset(keep);
    ds.classes = classes;
  }
  return ds;
}

inline std::vector<ClientState> build_clients(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  const LabeledDataset ds = load_dataset(cfg.data, run_seed);
  return make_clients(shard_partition(ds, cfg.partition, derive_seed(run_seed, {0x9a27})));
}

// Train config for one seed, with the smoothness-scaled learning rate resolved.
inline TrainConfig resolve_train_config(const ExperimentConfig& cfg, std::uint64_t run_seed,
                                        const std::vector<ClientState>& clients) {
  TrainConfig t = cfg.train;
  t.seed = run_seed;
  if (cfg.scaled_learning_rate) {
    double L = cfg.smoothness;
    if (L <= 0.0) {
      std::vector<const LabeledDataset*> sets;
      for (const auto& c : clients) sets.push_back(&c.train);
      L = estimate_smoothness(sets);
    }
    t.learning_rate = scaled_learning_rate(L, t.local_steps, t.rounds);
  }
  return t;
}

struct ResultRow {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t round = 0;
  double train_loss = 0.0;
  double mean_test_acc = 0.0;
  double dissimilarity = 0.0;
  std::size_t unique_participants = 0;
  double grad_norm_sq = 0.0;
  double lambda = 0.0;
  double b = 0.0;
  double mu = 0.0;
  std::size_t window = 0;
  std::string phi;
};

inline constexpr const char* kCsvHeader =
    "method,seed,round,train_loss,mean_test_acc,dissimilarity,unique_participants,grad_norm_sq,lambda,b,mu,window,phi";

inline std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_csv_row(std::ostream& os, const ResultRow& r) {
  os << r.method << ',' << r.seed << ',' << r.round << ',' << format_g6(r.train_loss) << ','
     << format_g6(r.mean_test_acc) << ',' << format_g6(r.dissimilarity) << ',' << r.unique_participants << ','
     << format_g6(r.grad_norm_sq) << ',' << format_g6(r.lambda) << ',' << format_g6(r.b) << ',' << format_g6(r.mu)
     << ',' << r.window << ',' << r.phi << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) write_csv_row(os, r);
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

struct SeedRun {
  std::uint64_t seed = 0;
  TrainingResult result;
  TrainConfig train;
};

inline SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t threads) {
  std::vector<ClientState> clients = build_clients(cfg, seed);
  TrainConfig t = resolve_train_config(cfg, seed, clients);
  t.threads = threads;
  return SeedRun{seed, run_training(t, clients), t};
}

inline std::vector<ResultRow> rows_for(const SeedRun& run) {
  std::vector<ResultRow> rows;
  const TrainConfig& t = run.train;
  for (const auto& rec : run.result.records) {
    rows.push_back(ResultRow{std::string(to_string(t.method)), run.seed, rec.round, rec.global_train_loss,
                             rec.mean_test_acc, rec.dissimilarity, rec.unique_participants, rec.grad_norm_sq,
                             t.fairness.lambda, t.fairness.b, t.unions.mu, t.unions.window,
                             std::string(to_string(t.fairness.phi))});
  }
  return rows;
}

// One training run per seed in [seed, seed + repeat). With threads > 1 seeds
// run concurrently; runs are collected in seed order either way.
inline std::vector<SeedRun> run_seeds(const ExperimentConfig& cfg) {
  const std::size_t threads = std::max<std::size_t>(1, cfg.train.threads);
  std::vector<SeedRun> runs(cfg.repeat);
  if (threads == 1 || cfg.repeat == 1) {
    for (std::size_t i = 0; i < cfg.repeat; ++i) runs[i] = run_seed(cfg, cfg.train.seed + i, threads);
    return runs;
  }
  for (std::size_t begin = 0; begin < cfg.repeat; begin += threads) {
    std::vector<std::future<SeedRun>> jobs;
    for (std::size_t i = begin; i < std::min(cfg.repeat, begin + threads); ++i)
      jobs.push_back(std::async(std::launch::async, run_seed, std::cref(cfg), cfg.train.seed + i, std::size_t{1}));
    for (std::size_t i = 0; i < jobs.size(); ++i) runs[begin + i] = jobs[i].get();
  }
  return runs;
}

inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  std::vector<ResultRow> rows;
  for (const auto& run : run_seeds(cfg)) {
    auto r = rows_for(run);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

enum class SweepParam { lambda, window, phi, b, mu };

inline std::optional<SweepParam> parse_sweep_param(const std::string& s) {
  static const std::map<std::string, SweepParam> m{{"lambda", SweepParam::lambda},
                                                   {"window", SweepParam::window},
                                                   {"phi", SweepParam::phi},
                                                   {"b", SweepParam::b},
                                                   {"mu", SweepParam::mu}};
  auto it = m.find(s);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

// Returns a copy of `cfg` with `param` set to `value`. Throws ConfigError if
// the parameter has no effect on the configured method or the value is bad.
inline ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, SweepParam param, const std::string& value) {
  const SelectionMethod m = cfg.train.method;
  const bool fairness_param = param == SweepParam::lambda || param == SweepParam::b || param == SweepParam::phi;
  if (fairness_param && m != SelectionMethod::subtrunc)
    throw ConfigError("/method", "parameter applies only to method 'subtrunc'");
  if (!fairness_param && m != SelectionMethod::unionfl)
    throw ConfigError("/method", "parameter applies only to method 'unionfl'");

  ExperimentConfig out = cfg;
  auto number = [&](double min_exclusive, bool allow_equal) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || !std::isfinite(v) || v < min_exclusive || (!allow_equal && v == min_exclusive))
      throw ConfigError("/values", "invalid value '" + value + "'");
    return v;
  };
  switch (param) {
    case SweepParam::lambda: out.train.fairness.lambda = number(0.0, true); break;
    case SweepParam::b: out.train.fairness.b = number(0.0, false); break;
    case SweepParam::mu: out.train.unions.mu = number(0.0, true); break;
    case SweepParam::window: {
      const double v = number(1.0, true);
      if (v != std::floor(v)) throw ConfigError("/values", "window must be an integer: '" + value + "'");
      out.train.unions.window = static_cast<std::size_t>(v);
      break;
    }
    case SweepParam::phi: {
      auto p = parse_phi(value);
      if (!p) throw ConfigError("/values", "unknown phi '" + value + "'");
      out.train.fairness.phi = *p;
      break;
    }
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(csv);
  while (std::getline(is, cur, ',')) {
    const auto a = cur.find_first_not_of(" \t");
    const auto b = cur.find_last_not_of(" \t");
    out.push_back(a == std::string::npos ? std::string() : cur.substr(a, b - a + 1));
  }
  return out;
}

// One experiment per value; every value is validated before anything runs.
inline std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg, SweepParam param,
                                        const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("/values", "no values to sweep");
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) configs.push_back(apply_sweep_value(cfg, param, v));
  std::vector<ResultRow> rows;
  for (const auto& c : configs) {
    auto r = run_experiment(c);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

}  // namespace fedsubsel
