#pragma once

// Self-contained verification suites with fixed internal seeds. Each returns
// a SuiteResult listing every failure witness it found.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fedsubsel/dataset.hpp"
#include "fedsubsel/model.hpp"
#include "fedsubsel/objectives.hpp"
#include "fedsubsel/rng.hpp"
#include "fedsubsel/submodular.hpp"

namespace fedsubsel {

struct SuiteResult {
  std::string name;
  std::size_t checks = 0;
  std::vector<std::string> failures;
  double seconds = 0.0;

  bool passed() const noexcept { return failures.empty(); }
};

namespace detail {

inline std::string format_set(const Subset& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << '}';
  return os.str();
}

inline std::string describe(const std::string& what, const Violation& v) {
  std::ostringstream os;
  os.precision(17);
  os << what << ": A=" << format_set(v.a) << " B=" << format_set(v.b) << " e=" << v.e << " lhs=" << v.lhs
     << " rhs=" << v.rhs;
  return os.str();
}

// Gradients drawn in a few loose clusters, so distance tables look like
// cached client gradients rather than uniform noise.
inline DistanceTable random_distance_table(std::size_t n, Rng& rng) {
  const std::size_t dim = 6;
  const std::size_t groups = 1 + static_cast<std::size_t>(uniform_index(rng, 4));
  std::vector<std::vector<double>> centers(groups, std::vector<double>(dim));
  for (auto& c : centers)
    for (double& v : c) v = 3.0 * standard_normal(rng);
  std::vector<std::vector<double>> grads(n, std::vector<double>(dim));
  for (auto& g : grads) {
    const auto& c = centers[static_cast<std::size_t>(uniform_index(rng, groups))];
    for (std::size_t k = 0; k < dim; ++k) g[k] = c[k] + standard_normal(rng);
  }
  return build_distance_table(grads);
}

inline LossVector random_losses(std::size_t n, Rng& rng) {
  std::vector<double> l(n);
  for (double& v : l) v = 3.0 * uniform_unit(rng);
  return LossVector(std::move(l));
}

inline FairnessParams random_fairness(Rng& rng) {
  FairnessParams p;
  p.lambda = 2.0 * uniform_unit(rng);
  p.b = 0.05 + 3.0 * uniform_unit(rng);
  p.phi = (rng() & 1U) ? PhiKind::identity : PhiKind::log1p;
  return p;
}

inline Subset random_subset(std::size_t n, std::size_t max_size, Rng& rng) {
  std::vector<ClientId> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const std::size_t k = static_cast<std::size_t>(uniform_index(rng, max_size + 1));
  Subset s = sample_without_replacement(std::move(all), k, rng);
  std::sort(s.begin(), s.end());
  return s;
}

template <SetObjective F>
void expect_property(SuiteResult& out, const std::string& label, const F& f, const GroundSet& ground,
                     PropertyKind kind, std::size_t trials, Rng& rng, CheckMode mode) {
  const PropertyReport rep = verify_property(f, ground, kind, trials, kDefaultTolerance, rng, mode);
  out.checks += rep.trials;
  for (const auto& v : rep.violations) out.failures.push_back(describe(label + " " + to_string(kind), v));
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// SubTrunc W (monotone + submodular), facility location G (monotone +
// submodular) and UnionFL h_t (submodular) on random instances: exhaustive
// chains on |N| ≤ 8 plus sampled chains on |N| = 30.
inline SuiteResult submodularity_suite(std::size_t instances = 50, std::size_t sampled_chains = 10000,
                                       std::uint64_t seed = 0x5b0d) {
  detail::Stopwatch clock;
  SuiteResult out{"submodularity", 0, {}, 0.0};
  Rng rng(seed);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    for (const bool small : {true, false}) {
      const std::size_t n = small ? 2 + static_cast<std::size_t>(uniform_index(rng, 7)) : 30;
      const CheckMode mode = small ? CheckMode::exhaustive : CheckMode::sampled;
      const GroundSet ground = GroundSet::range(n);
      const DistanceTable table = detail::random_distance_table(n, rng);
      const LossVector losses = detail::random_losses(n, rng);
      const FairnessParams fp = detail::random_fairness(rng);
      const std::string tag = "instance " + std::to_string(inst) + " n=" + std::to_string(n);

      const SubTrunc w{&table, &losses, fp};
      detail::expect_property(out, tag + " W", w, ground, PropertyKind::submodular, sampled_chains, rng, mode);
      detail::expect_property(out, tag + " W", w, ground, PropertyKind::monotone, sampled_chains, rng, mode);
      const FacilityLocation g{&table};
      detail::expect_property(out, tag + " G", g, ground, PropertyKind::submodular, sampled_chains / 4, rng, mode);
      detail::expect_property(out, tag + " G", g, ground, PropertyKind::monotone, sampled_chains / 4, rng, mode);

      SelectionHistory hist(1 + static_cast<std::size_t>(uniform_index(rng, 6)));
      const std::size_t past = static_cast<std::size_t>(uniform_index(rng, 8));
      for (std::size_t r = 0; r < past; ++r) hist.append(detail::random_subset(n, std::min<std::size_t>(n, 4), rng));
      const UnionFL h(table, hist, UnionParams{3.0 * uniform_unit(rng), hist.window()}, hist.size());
      detail::expect_property(out, tag + " h_t", h, ground, PropertyKind::submodular, sampled_chains / 4, rng, mode);
    }
  }
  out.seconds = clock.seconds();
  return out;
}

// g_t has a 0/1 marginal gain equal to [e ∈ recent union] whatever S is, so it
// is modular (both submodular and supermodular).
inline SuiteResult union_modularity_suite(std::size_t triples = 10000, std::uint64_t seed = 0x9e71) {
  detail::Stopwatch clock;
  SuiteResult out{"union_modularity", 0, {}, 0.0};
  Rng rng(seed);
  const std::size_t n = 30;
  const GroundSet ground = GroundSet::range(n);
  for (std::size_t t = 0; t < triples; ++t) {
    SelectionHistory hist(1 + static_cast<std::size_t>(uniform_index(rng, 8)));
    const std::size_t past = static_cast<std::size_t>(uniform_index(rng, 12));
    for (std::size_t r = 0; r < past; ++r) hist.append(detail::random_subset(n, 6, rng));
    const std::size_t round = static_cast<std::size_t>(uniform_index(rng, past + 1));
    const UnionPenalty g(hist, round);
    Subset s = detail::random_subset(n, n - 1, rng);
    std::vector<ClientId> outside;
    for (std::size_t i = 0; i < n; ++i)
      if (!std::binary_search(s.begin(), s.end(), i)) outside.push_back(i);
    const ClientId e = outside[static_cast<std::size_t>(uniform_index(rng, outside.size()))];

    const double gain = marginal_gain(g, ground, e, s);
    const double gain_empty = marginal_gain(g, ground, e, Subset{});
    const auto& u = g.recent_union();
    const double expected = std::binary_search(u.begin(), u.end(), e) ? 1.0 : 0.0;
    ++out.checks;
    if ((gain != 0.0 && gain != 1.0) || gain != gain_empty || gain != expected) {
      std::ostringstream os;
      os << "g_t triple " << t << ": S=" << detail::format_set(s) << " e=" << e << " gain=" << gain
         << " gain_at_empty=" << gain_empty << " expected=" << expected;
      out.failures.push_back(os.str());
    }
  }
  out.seconds = clock.seconds();
  return out;
}

// Greedy reaches (1 − 1/e) of the brute-force optimum on small monotone
// submodular instances (facility location and SubTrunc).
inline SuiteResult greedy_bound_suite(std::size_t instances = 100, std::uint64_t seed = 0x67bd) {
  detail::Stopwatch clock;
  SuiteResult out{"greedy_bound", 0, {}, 0.0};
  Rng rng(seed);
  const double ratio = 1.0 - 1.0 / std::exp(1.0);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const std::size_t kappa = 2 + inst % 3;
    const std::size_t n = kappa + 1 + static_cast<std::size_t>(uniform_index(rng, 12 - kappa));
    const GroundSet ground = GroundSet::range(n);
    const DistanceTable table = detail::random_distance_table(n, rng);
    const LossVector losses = detail::random_losses(n, rng);
    const FairnessParams fp = detail::random_fairness(rng);
    auto check = [&](const auto& f, const char* label) {
      const Subset g = greedy_maximize(f, ground, kappa);
      const double gv = f(sorted_copy(g));
      const BruteForceResult opt = brute_force_maximize(f, ground, kappa);
      ++out.checks;
      if (gv < ratio * opt.value - 1e-9) {
        std::ostringstream os;
        os.precision(17);
        os << label << " instance " << inst << " n=" << n << " kappa=" << kappa << ": greedy=" << gv
           << " opt=" << opt.value << " set=" << detail::format_set(opt.set);
        out.failures.push_back(os.str());
      }
    };
    if (inst % 2 == 0)
      check(FacilityLocation{&table}, "G");
    else
      check(SubTrunc{&table, &losses, fp}, "W");
  }
  out.seconds = clock.seconds();
  return out;
}

// ‖analytic − central difference‖ / max(‖analytic‖, ‖central difference‖).
inline double gradient_relative_error(const ModelParams& m, const LabeledDataset& data,
                                      std::span<const std::size_t> rows, double step = 1e-5) {
  const LossGrad lg = loss_and_grad(m, data, rows);
  ModelParams probe = m;
  double diff2 = 0.0, a2 = 0.0, f2 = 0.0;
  for (std::size_t k = 0; k < m.w.size(); ++k) {
    probe.w[k] = m.w[k] + step;
    const double up = loss_and_grad(probe, data, rows).loss;
    probe.w[k] = m.w[k] - step;
    const double down = loss_and_grad(probe, data, rows).loss;
    probe.w[k] = m.w[k];
    const double fd = (up - down) / (2.0 * step);
    diff2 += (lg.grad[k] - fd) * (lg.grad[k] - fd);
    a2 += lg.grad[k] * lg.grad[k];
    f2 += fd * fd;
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(f2), 1e-12});
  return std::sqrt(diff2) / denom;
}

// Random (w, batch) pairs per model kind checked against central differences.
inline SuiteResult gradient_suite(std::size_t checks_per_kind = 100, double tolerance = 1e-5,
                                  std::uint64_t seed = 0x6a4d) {
  detail::Stopwatch clock;
  SuiteResult out{"gradients", 0, {}, 0.0};
  Rng rng(seed);
  for (const ModelKind kind : {ModelKind::logistic, ModelKind::mlp}) {
    for (std::size_t t = 0; t < checks_per_kind; ++t) {
      const std::size_t classes = 2 + static_cast<std::size_t>(uniform_index(rng, 4));
      const std::size_t dims = 2 + static_cast<std::size_t>(uniform_index(rng, 6));
      const ModelShape shape{dims, classes, kind == ModelKind::mlp ? std::size_t{32} : std::size_t{0}};
      ModelParams m{kind, shape, std::vector<double>(parameter_count(kind, shape))};
      for (double& v : m.w) v = 0.5 * standard_normal(rng);
      LabeledDataset data = generate_synthetic(classes, dims, 4, 1.5, rng());
      const std::size_t batch = 1 + static_cast<std::size_t>(uniform_index(rng, 8));
      std::vector<std::size_t> rows(batch);
      for (auto& r : rows) r = static_cast<std::size_t>(uniform_index(rng, data.rows));
      const double err = gradient_relative_error(m, data, rows);
      ++out.checks;
      if (!(err < tolerance)) {
        std::ostringstream os;
        os << to_string(kind) << " check " << t << ": relative error " << err;
        out.failures.push_back(os.str());
      }
    }
  }
  out.seconds = clock.seconds();
  return out;
}

// Shard partitions on random feasible specs: disjoint cover of the dataset,
// exactly classes_per_client labels per client, train and test both covering
// the client's classes.
inline SuiteResult partition_suite(std::size_t specs = 40, std::uint64_t seed = 0x9a27) {
  detail::Stopwatch clock;
  SuiteResult out{"partition", 0, {}, 0.0};
  Rng rng(seed);
  for (std::size_t t = 0; t < specs; ++t) {
    const std::size_t classes = 2 + static_cast<std::size_t>(uniform_index(rng, 9));
    const std::size_t cpc = 1 + static_cast<std::size_t>(uniform_index(rng, classes));
    const std::size_t min_clients = (classes + cpc - 1) / cpc;
    const std::size_t clients = min_clients + static_cast<std::size_t>(uniform_index(rng, 20));
    const std::size_t per_class = 2 * clients + static_cast<std::size_t>(uniform_index(rng, 30));
    LabeledDataset ds = generate_synthetic(classes, 2, per_class, 1.0, rng());
    // Tag each row with its index in the first feature to track coverage.
    for (std::size_t r = 0; r < ds.rows; ++r) ds.features[r * ds.cols] = static_cast<double>(r);
    const PartitionSpec spec{clients, cpc, 0.5 + 0.4 * uniform_unit(rng)};
    const auto parts = shard_partition(ds, spec, rng());
    std::vector<int> seen(ds.rows, 0);
    ++out.checks;
    for (std::size_t c = 0; c < parts.size(); ++c) {
      std::set<int> train_labels, test_labels;
      for (const auto* split : {&parts[c].train, &parts[c].test})
        for (std::size_t r = 0; r < split->rows; ++r) {
          ++seen[static_cast<std::size_t>(split->features[r * split->cols])];
          (split == &parts[c].train ? train_labels : test_labels).insert(split->labels[r]);
        }
      if (train_labels.size() != cpc || test_labels != train_labels)
        out.failures.push_back("spec " + std::to_string(t) + " client " + std::to_string(c) + ": holds " +
                               std::to_string(train_labels.size()) + " train classes / " +
                               std::to_string(test_labels.size()) + " test classes, expected " + std::to_string(cpc));
    }
    for (std::size_t r = 0; r < ds.rows; ++r)
      if (seen[r] != 1)
        out.failures.push_back("spec " + std::to_string(t) + ": row " + std::to_string(r) + " appears " +
                               std::to_string(seen[r]) + " times");
  }
  out.seconds = clock.seconds();
  return out;
}

}  // namespace fedsubsel
