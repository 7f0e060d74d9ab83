#pragma once

// Client-selection objectives over a ground set {0, ..., n-1}:
//
//   G(S)   facility-location gain   Ḡ(∅) − Σ_i min_{j∈S} d(i, j)
//   H(S)   truncated fairness       λ · min(b, Σ_{i∈S} φ(loss_i))
//   W(S)   SubTrunc                 G(S) + H(S)
//   g_t(S) union penalty            |U_t ∩ S|, U_t = union of recent selections
//   h_t(S) UnionFL                  G(S) − μ · g_t(S)
//
// plus the random and Power-of-Choice baseline samplers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsubsel/error.hpp"
#include "fedsubsel/rng.hpp"
#include "fedsubsel/submodular.hpp"

namespace fedsubsel {

// Symmetric matrix of pairwise Euclidean distances between cached client
// gradients, zero on the diagonal.
class DistanceTable {
 public:
  DistanceTable() = default;

  // Row-major n×n entries; validated for symmetry, zero diagonal and
  // finite non-negative values.
  DistanceTable(std::size_t n, std::vector<double> entries) : n_(n), d_(std::move(entries)) {
    if (n_ == 0) throw DataError("distance table must have at least one client");
    if (d_.size() != n_ * n_) throw DataError("distance table must have n*n entries");
    for (std::size_t i = 0; i < n_; ++i) {
      if (at(i, i) != 0.0) throw DataError("distance table diagonal must be zero");
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = at(i, j);
        if (!std::isfinite(v) || v < 0.0) throw DataError("distance table entries must be finite and non-negative");
        if (v != at(j, i)) throw DataError("distance table must be symmetric");
      }
    }
    max_ = n_ ? *std::max_element(d_.begin(), d_.end()) : 0.0;
  }

  static DistanceTable from_rows(const std::vector<std::vector<double>>& rows) {
    std::vector<double> flat;
    flat.reserve(rows.size() * rows.size());
    for (const auto& r : rows) {
      if (r.size() != rows.size()) throw DataError("distance table rows must be square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return DistanceTable(rows.size(), std::move(flat));
  }

  std::size_t size() const noexcept { return n_; }
  double at(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  // Stand-in for the minimum over an empty selection.
  double max_entry() const noexcept { return max_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
  double max_ = 0.0;
};

// Pairwise Euclidean distances between flattened gradients.
inline DistanceTable build_distance_table(std::span<const std::vector<double>> gradients) {
  if (gradients.empty()) throw DataError("need at least one gradient");
  const std::size_t dim = gradients.front().size();
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    if (gradients[i].size() != dim)
      throw DataError("gradient " + std::to_string(i) + " has dimension " + std::to_string(gradients[i].size()) +
                      ", expected " + std::to_string(dim));
    for (double v : gradients[i])
      if (!std::isfinite(v)) throw DataError("gradient " + std::to_string(i) + " has a non-finite entry");
  }
  const std::size_t n = gradients.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = gradients[i][k] - gradients[j][k];
        acc += diff * diff;
      }
      d[i * n + j] = d[j * n + i] = std::sqrt(acc);
    }
  }
  return DistanceTable(n, std::move(d));
}

// Cached per-client losses, clamped at zero.
class LossVector {
 public:
  LossVector() = default;
  explicit LossVector(std::vector<double> losses) : losses_(std::move(losses)) {
    for (double& v : losses_) {
      if (!std::isfinite(v)) throw DataError("loss vector entries must be finite");
      v = std::max(v, 0.0);
    }
  }

  std::size_t size() const noexcept { return losses_.size(); }
  double operator[](std::size_t i) const { return losses_[i]; }
  std::span<const double> values() const noexcept { return losses_; }

 private:
  std::vector<double> losses_;
};

enum class PhiKind { identity, log1p };

inline std::string_view to_string(PhiKind k) { return k == PhiKind::identity ? "identity" : "log1p"; }

struct PhiValue {
  double value = 0.0;
  bool clamped = false;  // input was negative and treated as 0
};

inline PhiValue phi_apply(PhiKind kind, double x) {
  PhiValue out;
  if (x < 0.0) {
    x = 0.0;
    out.clamped = true;
  }
  out.value = kind == PhiKind::identity ? x : std::log1p(x);
  return out;
}

struct FairnessParams {
  double lambda = 0.0;
  double b = 1.10;
  PhiKind phi = PhiKind::log1p;

  void validate() const {
    if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
    if (!(b > 0.0)) throw DomainError("b must be > 0");
  }
};

struct UnionParams {
  double mu = 1.0;
  std::size_t window = 5;

  void validate() const {
    if (!(mu >= 0.0)) throw DomainError("mu must be >= 0");
    if (window < 1) throw DomainError("window must be >= 1");
  }
};

// Chronological record of selected subsets S_0, S_1, ... with a contiguous
// look-back window.
class SelectionHistory {
 public:
  explicit SelectionHistory(std::size_t window = 1) : window_(window) {
    if (window_ < 1) throw DomainError("window must be >= 1");
  }

  void append(Subset s) {
    std::sort(s.begin(), s.end());
    rounds_.push_back(std::move(s));
  }

  std::size_t window() const noexcept { return window_; }
  std::size_t size() const noexcept { return rounds_.size(); }
  const std::vector<Subset>& rounds() const noexcept { return rounds_; }

  // Union of S_{t-w}, ..., S_{t-1} with w = min(window, t); empty at t = 0.
  Subset union_before(std::size_t t) const {
    if (t > rounds_.size())
      throw DomainError("round " + std::to_string(t) + " is beyond the recorded history");
    Subset u;
    const std::size_t first = t - std::min(window_, t);
    for (std::size_t i = first; i < t; ++i) u.insert(u.end(), rounds_[i].begin(), rounds_[i].end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
  }

 private:
  std::size_t window_;
  std::vector<Subset> rounds_;
};

namespace detail {

inline void check_indices(std::span<const ClientId> s, std::size_t n) {
  for (ClientId e : s)
    if (e >= n) throw DomainError("client " + std::to_string(e) + " out of range for " + std::to_string(n) + " clients");
}

inline std::size_t count_in(std::span<const ClientId> s, const Subset& sorted_union) {
  std::size_t c = 0;
  for (ClientId e : s) c += std::binary_search(sorted_union.begin(), sorted_union.end(), e) ? 1 : 0;
  return c;
}

}  // namespace detail

inline double facility_location_value(std::span<const ClientId> s, const DistanceTable& t) {
  const std::size_t n = t.size();
  detail::check_indices(s, n);
  if (s.empty()) return 0.0;
  const double dmax = t.max_entry();
  double covered = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = dmax;
    for (ClientId j : s) m = std::min(m, t.at(i, j));
    covered += m;
  }
  return static_cast<double>(n) * dmax - covered;
}

inline double truncated_fairness_value(std::span<const ClientId> s, const LossVector& losses, const FairnessParams& p) {
  detail::check_indices(s, losses.size());
  double sum = 0.0;
  for (ClientId i : s) sum += phi_apply(p.phi, losses[i]).value;
  return p.lambda * std::min(p.b, sum);
}

inline double subtrunc_value(std::span<const ClientId> s, const DistanceTable& t, const LossVector& losses,
                             const FairnessParams& p) {
  return facility_location_value(s, t) + truncated_fairness_value(s, losses, p);
}

inline std::size_t union_penalty(std::span<const ClientId> s, const SelectionHistory& h, std::size_t round) {
  if (s.empty() || round == 0) return 0;
  return detail::count_in(s, h.union_before(round));
}

inline double unionfl_value(std::span<const ClientId> s, const DistanceTable& t, const SelectionHistory& h,
                            const UnionParams& p, std::size_t round) {
  return facility_location_value(s, t) - p.mu * static_cast<double>(union_penalty(s, h, round));
}

// Function objects over immutable snapshots, usable with the maximizers.

struct FacilityLocation {
  const DistanceTable* table;
  double operator()(std::span<const ClientId> s) const { return facility_location_value(s, *table); }
};

struct TruncatedFairness {
  const LossVector* losses;
  FairnessParams params;
  double operator()(std::span<const ClientId> s) const { return truncated_fairness_value(s, *losses, params); }
};

struct SubTrunc {
  const DistanceTable* table;
  const LossVector* losses;
  FairnessParams params;
  double operator()(std::span<const ClientId> s) const { return subtrunc_value(s, *table, *losses, params); }
};

// g_t with the union precomputed for one round.
class UnionPenalty {
 public:
  UnionPenalty(const SelectionHistory& h, std::size_t round) : union_(h.union_before(round)) {}
  double operator()(std::span<const ClientId> s) const {
    return static_cast<double>(detail::count_in(s, union_));
  }
  const Subset& recent_union() const noexcept { return union_; }

 private:
  Subset union_;
};

class UnionFL {
 public:
  UnionFL(const DistanceTable& t, const SelectionHistory& h, UnionParams p, std::size_t round)
      : table_(&t), penalty_(h, round), params_(p) {}
  double operator()(std::span<const ClientId> s) const {
    return facility_location_value(s, *table_) - params_.mu * penalty_(s);
  }

 private:
  const DistanceTable* table_;
  UnionPenalty penalty_;
  UnionParams params_;
};

// Uniform κ-subset without replacement, returned sorted.
inline Subset select_random(const GroundSet& ground, std::size_t budget, Rng& rng) {
  if (budget < 1 || budget > ground.size()) throw DomainError("budget out of range for random selection");
  Subset s = sample_without_replacement(std::vector<ClientId>(ground.ids().begin(), ground.ids().end()), budget, rng);
  std::sort(s.begin(), s.end());
  return s;
}

// Samples `candidates` clients uniformly without replacement and keeps the κ
// with the highest cached loss (ties to the smallest id). Returned sorted.
inline Subset select_power_of_choice(const LossVector& losses, std::size_t budget, std::size_t candidates, Rng& rng) {
  const std::size_t n = losses.size();
  if (budget < 1 || budget > candidates || candidates > n)
    throw DomainError("power-of-choice requires 1 <= kappa <= d <= n (kappa=" + std::to_string(budget) +
                      ", d=" + std::to_string(candidates) + ", n=" + std::to_string(n) + ")");
  std::vector<ClientId> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  Subset pool = sample_without_replacement(std::move(all), candidates, rng);
  std::sort(pool.begin(), pool.end());
  std::stable_sort(pool.begin(), pool.end(), [&](ClientId a, ClientId b) { return losses[a] > losses[b]; });
  pool.resize(budget);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace fedsubsel
