// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fedsubsel.hpp"

using namespace fedsubsel;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> run;
};

Verdict from_suites(std::initializer_list<SuiteResult> suites) {
  Verdict v{true, ""};
  std::ostringstream os;
  for (const auto& s : suites) {
    v.pass = v.pass && s.passed();
    os << s.name << ": " << s.checks << " checks, " << s.failures.size() << " violations; ";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, s.failures.size()); ++i) os << "[" << s.failures[i] << "] ";
  }
  v.detail = os.str();
  return v;
}

// Synthetic non-iid federation: 10 classes in 20 dimensions, 30 clients with
// 3 classes each, κ=5, r=8, E=5, K=200, logistic regression.
ExperimentConfig desk_setup() {
  ExperimentConfig cfg;
  cfg.data.classes = 10;
  cfg.data.dims = 20;
  cfg.data.per_class = 300;
  cfg.data.spread = 3.0;
  cfg.partition = PartitionSpec{30, 3, 0.8};
  cfg.train.rounds = 200;
  cfg.train.local_steps = 5;
  cfg.train.clients_per_round = 5;
  cfg.train.sample_size = 8;
  cfg.train.learning_rate = 0.05;
  cfg.train.batch_size = 32;
  cfg.train.model_kind = ModelKind::logistic;
  cfg.train.seed = 1;
  cfg.repeat = 10;
  return cfg;
}

ExperimentConfig with_method(ExperimentConfig cfg, SelectionMethod m) {
  cfg.train.method = m;
  return cfg;
}

std::vector<double> final_dissimilarity(const ExperimentConfig& cfg) {
  std::vector<double> out;
  for (const auto& run : run_seeds(cfg)) out.push_back(run.result.records.back().dissimilarity);
  return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_g6(v[i]);
  return os.str();
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return rank;
}

// Pearson correlation of average ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::string strip_first_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(line.find(',')) + "\n";
  return out;
}

Verdict reductions() {
  ExperimentConfig base = desk_setup();
  base.partition.n_clients = 20;
  base.train.rounds = 20;
  base.repeat = 2;
  base.train.fairness.lambda = 0.0;
  base.train.unions.mu = 0.0;
  const std::string divfl = to_csv(run_experiment(with_method(base, SelectionMethod::divfl)));
  const std::string subtrunc = to_csv(run_experiment(with_method(base, SelectionMethod::subtrunc)));
  const std::string unionfl = to_csv(run_experiment(with_method(base, SelectionMethod::unionfl)));
  const bool a = strip_first_column(subtrunc) == strip_first_column(divfl);
  const bool b = strip_first_column(unionfl) == strip_first_column(divfl);
  std::ostringstream os;
  os << "subtrunc(lambda=0) vs divfl " << (a ? "identical" : "DIFFER") << ", unionfl(mu=0) vs divfl "
     << (b ? "identical" : "DIFFER") << " (" << std::count(divfl.begin(), divfl.end(), '\n') - 1
     << " rows each; method column excluded)";
  return {a && b, os.str()};
}

Verdict directional_fairness() {
  ExperimentConfig cfg = desk_setup();
  cfg.train.fairness = FairnessParams{0.95, 1.10, PhiKind::log1p};
  const auto sub = final_dissimilarity(with_method(cfg, SelectionMethod::subtrunc));
  const auto rnd = final_dissimilarity(with_method(cfg, SelectionMethod::random));
  std::ostringstream os;
  os << "mean final dissimilarity subtrunc=" << format_g6(mean(sub)) << " random=" << format_g6(mean(rnd))
     << " | subtrunc seeds [" << join(sub) << "] random seeds [" << join(rnd) << "]";
  return {mean(sub) < mean(rnd), os.str()};
}

Verdict lambda_trend() {
  const std::vector<double> grid{0.01, 0.25, 0.75, 0.95};
  std::vector<double> means;
  for (double lam : grid) {
    ExperimentConfig cfg = with_method(desk_setup(), SelectionMethod::subtrunc);
    cfg.train.fairness = FairnessParams{lam, 1.10, PhiKind::log1p};
    means.push_back(mean(final_dissimilarity(cfg)));
  }
  const double rho = spearman(grid, means);
  std::ostringstream os;
  os << "lambda {0.01,0.25,0.75,0.95} -> mean dissimilarity [" << join(means) << "], spearman=" << format_g6(rho);
  return {rho <= 0.0, os.str()};
}

Verdict participation() {
  ExperimentConfig cfg = desk_setup();
  cfg.train.unions = UnionParams{1.0, 5};
  const auto uni = run_seeds(with_method(cfg, SelectionMethod::unionfl));
  const auto div = run_seeds(with_method(cfg, SelectionMethod::divfl));
  int wins = 0;
  std::ostringstream seeds;
  for (std::size_t i = 0; i < uni.size(); ++i) {
    const auto u = uni[i].result.records.back().unique_participants;
    const auto d = div[i].result.records.back().unique_participants;
    wins += u >= d ? 1 : 0;
    // Distinct clients after the first window of rounds is the sharper signal.
    const auto u5 = uni[i].result.records[4].unique_participants, d5 = div[i].result.records[4].unique_participants;
    seeds << (i ? " " : "") << u << "/" << d << "(k5:" << u5 << "/" << d5 << ")";
  }
  std::ostringstream os;
  os << "unionfl >= divfl unique participants on " << wins << "/10 seeds; unionfl/divfl per seed: " << seeds.str();
  return {wins >= 8, os.str()};
}

Verdict convergence() {
  ExperimentConfig cfg = with_method(desk_setup(), SelectionMethod::subtrunc);
  cfg.train.fairness = FairnessParams{0.95, 1.10, PhiKind::log1p};
  cfg.scaled_learning_rate = true;
  cfg.repeat = 5;
  auto min_grad = [](const SeedRun& r) {
    double m = r.result.records.front().grad_norm_sq;
    for (const auto& rec : r.result.records) m = std::min(m, rec.grad_norm_sq);
    return m;
  };
  cfg.train.rounds = 100;
  const auto short_runs = run_seeds(cfg);
  cfg.train.rounds = 400;
  const auto long_runs = run_seeds(cfg);
  bool ok = true;
  std::ostringstream os;
  os << "min grad norm^2 K=100 vs K=400 per seed:";
  for (std::size_t i = 0; i < short_runs.size(); ++i) {
    const double a = min_grad(short_runs[i]), b = min_grad(long_runs[i]);
    ok = ok && b <= a;
    os << " " << format_g6(a) << "/" << format_g6(b);
  }
  os << " (eta K=100 " << format_g6(short_runs[0].train.learning_rate) << ", K=400 "
     << format_g6(long_runs[0].train.learning_rate) << ")";
  return {ok, os.str()};
}

Verdict determinism() {
  ExperimentConfig cfg = with_method(desk_setup(), SelectionMethod::unionfl);
  cfg.train.rounds = 30;
  cfg.repeat = 3;
  cfg.train.threads = 1;
  const std::string one = to_csv(run_experiment(cfg));
  const std::string again = to_csv(run_experiment(cfg));
  cfg.train.threads = 4;
  const std::string four = to_csv(run_experiment(cfg));
  ExperimentConfig sub = with_method(desk_setup(), SelectionMethod::subtrunc);
  sub.train.rounds = 30;
  sub.repeat = 2;
  sub.train.fairness.lambda = 0.5;
  const std::string s1 = to_csv(run_experiment(sub));
  sub.train.threads = 3;
  const std::string s3 = to_csv(run_experiment(sub));
  const bool ok = one == again && one == four && s1 == s3;
  return {ok, std::string("re-run ") + (one == again ? "identical" : "DIFFERS") + ", threads 1 vs 4 " +
                  (one == four ? "identical" : "DIFFERS") + ", subtrunc threads 1 vs 3 " +
                  (s1 == s3 ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "submodularity and monotonicity", 30, [] { return from_suites({submodularity_suite(50, 10000)}); }},
      {2, "union penalty modularity", 5, [] { return from_suites({union_modularity_suite(10000)}); }},
      {3, "greedy oracle bound", 60, [] { return from_suites({greedy_bound_suite(100)}); }},
      {4, "reductions to divfl", 30, reductions},
      {5, "gradient correctness", 10, [] { return from_suites({gradient_suite(100, 1e-5)}); }},
      {6, "directional fairness", 300, directional_fairness},
      {7, "lambda trend", 600, lambda_trend},
      {8, "participation fairness", 300, participation},
      {9, "convergence trend", 300, convergence},
      {10, "determinism", 60, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = v.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("criterion %2d %s: %s (%.2f s of %.0f s budget%s) %s\n", c.id, pass ? "PASS" : "FAIL", c.name, secs,
                c.budget_seconds, in_time ? "" : ", OVER BUDGET", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
