#pragma once

// Generic set-function machinery: marginal gains, greedy and stochastic
// greedy maximizers under a cardinality budget, an exhaustive oracle, and
// randomized/exhaustive checkers for submodularity, supermodularity and
// monotonicity.
//
// A set objective is any callable `double(std::span<const ClientId>)`. The
// span handed to the objective is always sorted ascending, so objectives whose
// floating-point result depends on summation order still behave as pure set
// functions.

#include <algorithm>
#include <bit>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedsubsel/error.hpp"
#include "fedsubsel/rng.hpp"

namespace fedsubsel {

using ClientId = std::size_t;
using Subset = std::vector<ClientId>;

template <class F>
concept SetObjective = std::invocable<const F&, std::span<const ClientId>> &&
    std::convertible_to<std::invoke_result_t<const F&, std::span<const ClientId>>, double>;

// Type-erased objective for call sites that pick the objective at runtime.
using SetFunction = std::function<double(std::span<const ClientId>)>;

// Sorted, duplicate-free, non-empty list of client ids.
class GroundSet {
 public:
  explicit GroundSet(std::vector<ClientId> ids) : ids_(std::move(ids)) {
    if (ids_.empty()) throw DomainError("ground set must contain at least one client");
    std::sort(ids_.begin(), ids_.end());
    if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end())
      throw DomainError("ground set ids must be distinct");
  }

  // {0, 1, ..., n-1}
  static GroundSet range(std::size_t n) {
    std::vector<ClientId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    return GroundSet(std::move(ids));
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::span<const ClientId> ids() const noexcept { return ids_; }
  ClientId operator[](std::size_t i) const { return ids_[i]; }
  bool contains(ClientId e) const { return std::binary_search(ids_.begin(), ids_.end(), e); }

 private:
  std::vector<ClientId> ids_;
};

inline Subset sorted_copy(std::span<const ClientId> s) {
  Subset out(s.begin(), s.end());
  std::sort(out.begin(), out.end());
  return out;
}

inline Subset with_element(std::span<const ClientId> sorted, ClientId e) {
  Subset out;
  out.reserve(sorted.size() + 1);
  auto pos = std::lower_bound(sorted.begin(), sorted.end(), e);
  out.insert(out.end(), sorted.begin(), pos);
  out.push_back(e);
  out.insert(out.end(), pos, sorted.end());
  return out;
}

// f(S ∪ {e}) − f(S). Throws DomainError if e ∈ S or e ∉ N.
template <SetObjective F>
double marginal_gain(const F& f, const GroundSet& ground, ClientId e, std::span<const ClientId> s) {
  if (!ground.contains(e)) throw DomainError("element " + std::to_string(e) + " is not in the ground set");
  const Subset base = sorted_copy(s);
  if (std::binary_search(base.begin(), base.end(), e))
    throw DomainError("element " + std::to_string(e) + " is already in the set");
  const Subset grown = with_element(base, e);
  return static_cast<double>(f(std::span<const ClientId>(grown))) -
         static_cast<double>(f(std::span<const ClientId>(base)));
}

namespace detail {

inline void check_budget(const GroundSet& ground, std::size_t budget) {
  if (budget < 1 || budget > ground.size())
    throw DomainError("budget " + std::to_string(budget) + " outside [1, " + std::to_string(ground.size()) + "]");
}

// Argmax of the marginal gain over `candidates` (ascending ids); the first
// strictly larger gain wins, so ties go to the smallest id.
template <SetObjective F>
ClientId best_candidate(const F& f, std::span<const ClientId> members, std::span<const ClientId> candidates) {
  const double base = static_cast<double>(f(members));
  ClientId best = candidates.front();
  double best_gain = 0.0;
  bool first = true;
  for (ClientId e : candidates) {
    const Subset grown = with_element(members, e);
    const double gain = static_cast<double>(f(std::span<const ClientId>(grown))) - base;
    if (first || gain > best_gain) {
      best = e;
      best_gain = gain;
      first = false;
    }
  }
  return best;
}

}  // namespace detail

// κ rounds of argmax marginal gain. Elements are returned in selection order.
// Selection continues through negative gains so the result always has exactly
// κ elements.
template <SetObjective F>
Subset greedy_maximize(const F& f, const GroundSet& ground, std::size_t budget) {
  detail::check_budget(ground, budget);
  Subset order;
  Subset members;
  std::vector<ClientId> remaining(ground.ids().begin(), ground.ids().end());
  order.reserve(budget);
  while (order.size() < budget) {
    const ClientId e = detail::best_candidate(f, members, remaining);
    order.push_back(e);
    members = with_element(members, e);
    remaining.erase(std::lower_bound(remaining.begin(), remaining.end(), e));
  }
  return order;
}

// Stochastic greedy: each step draws min(r, |N \ S|) candidates uniformly
// without replacement from N \ S and adds the best of them.
template <SetObjective F>
Subset stochastic_greedy_maximize(const F& f, const GroundSet& ground, std::size_t budget,
                                  std::size_t sample_size, Rng& rng) {
  detail::check_budget(ground, budget);
  if (sample_size < 1) throw DomainError("sample size must be at least 1");
  Subset order;
  Subset members;
  std::vector<ClientId> remaining(ground.ids().begin(), ground.ids().end());
  order.reserve(budget);
  while (order.size() < budget) {
    Subset candidates = sample_without_replacement(remaining, sample_size, rng);
    std::sort(candidates.begin(), candidates.end());
    const ClientId e = detail::best_candidate(f, members, candidates);
    order.push_back(e);
    members = with_element(members, e);
    remaining.erase(std::lower_bound(remaining.begin(), remaining.end(), e));
  }
  return order;
}

struct BruteForceResult {
  Subset set;
  double value = 0.0;
};

inline constexpr std::size_t kBruteForceLimit = 20;

// Exact maximum over all non-empty subsets of size ≤ κ. Ties go to the
// lexicographically smallest (sorted) set.
template <SetObjective F>
BruteForceResult brute_force_maximize(const F& f, const GroundSet& ground, std::size_t budget) {
  if (ground.size() > kBruteForceLimit)
    throw DomainError("brute force refused: ground set has " + std::to_string(ground.size()) +
                      " elements, limit is " + std::to_string(kBruteForceLimit));
  detail::check_budget(ground, budget);
  const std::size_t n = ground.size();
  BruteForceResult best;
  bool have = false;
  Subset s;
  for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > budget) continue;
    s.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::uint32_t{1} << i)) s.push_back(ground[i]);
    const double v = static_cast<double>(f(std::span<const ClientId>(s)));
    if (!have || v > best.value || (v == best.value && s < best.set)) {
      best.set = s;
      best.value = v;
      have = true;
    }
  }
  return best;
}

enum class PropertyKind { submodular, supermodular, monotone };

inline const char* to_string(PropertyKind k) {
  switch (k) {
    case PropertyKind::submodular: return "submodular";
    case PropertyKind::supermodular: return "supermodular";
    case PropertyKind::monotone: return "monotone";
  }
  return "?";
}

enum class CheckMode { automatic, exhaustive, sampled };

// One failed inequality. For the chain properties lhs = Δ(e|A) and
// rhs = Δ(e|B); for monotonicity A = B = S, lhs = Δ(e|S) and rhs = 0.
struct Violation {
  Subset a;
  Subset b;
  ClientId e = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct PropertyReport {
  PropertyKind kind = PropertyKind::submodular;
  std::size_t trials = 0;
  std::vector<Violation> violations;
  double tolerance = 0.0;
  bool exhaustive = false;

  bool ok() const noexcept { return violations.empty(); }
};

inline constexpr std::size_t kExhaustiveLimit = 8;
inline constexpr double kDefaultTolerance = 1e-9;

namespace detail {

inline bool violates(PropertyKind kind, double lhs, double rhs, double tol) {
  switch (kind) {
    case PropertyKind::submodular: return lhs < rhs - tol;
    case PropertyKind::supermodular: return lhs > rhs + tol;
    case PropertyKind::monotone: return lhs < -tol;
  }
  return false;
}

inline Subset subset_from_mask(const GroundSet& ground, std::uint32_t mask) {
  Subset s;
  for (std::size_t i = 0; i < ground.size(); ++i)
    if (mask & (std::uint32_t{1} << i)) s.push_back(ground[i]);
  return s;
}

template <SetObjective F>
void check_one(const F& f, const GroundSet& ground, PropertyKind kind, double tol, const Subset& a,
               const Subset& b, ClientId e, PropertyReport& report) {
  ++report.trials;
  double lhs = 0.0;
  double rhs = 0.0;
  if (kind == PropertyKind::monotone) {
    lhs = marginal_gain(f, ground, e, a);
  } else {
    lhs = marginal_gain(f, ground, e, a);
    rhs = marginal_gain(f, ground, e, b);
  }
  if (violates(kind, lhs, rhs, tol)) report.violations.push_back({a, b, e, lhs, rhs});
}

}  // namespace detail

// Checks the inequality of `kind` over chains A ⊆ B ⊆ N with e ∈ N \ B (or
// over (S, e ∉ S) for monotonicity). Automatic mode enumerates every chain
// when |N| ≤ 8 and otherwise draws `trials` random chains.
template <SetObjective F>
PropertyReport verify_property(const F& f, const GroundSet& ground, PropertyKind kind, std::size_t trials,
                               double tolerance, Rng& rng, CheckMode mode = CheckMode::automatic) {
  if (trials < 1) throw DomainError("trials must be at least 1");
  if (!(tolerance >= 0.0)) throw DomainError("tolerance must be non-negative");
  PropertyReport report;
  report.kind = kind;
  report.tolerance = tolerance;
  const std::size_t n = ground.size();
  const bool exhaustive =
      mode == CheckMode::exhaustive || (mode == CheckMode::automatic && n <= kExhaustiveLimit);
  if (exhaustive && n > kBruteForceLimit) throw DomainError("exhaustive check refused: ground set too large");
  report.exhaustive = exhaustive;

  if (exhaustive) {
    const std::uint32_t full = (std::uint32_t{1} << n) - 1;
    for (std::uint32_t bmask = 0; bmask <= full; ++bmask) {
      const Subset b = detail::subset_from_mask(ground, bmask);
      for (std::size_t ei = 0; ei < n; ++ei) {
        if (bmask & (std::uint32_t{1} << ei)) continue;
        const ClientId e = ground[ei];
        if (kind == PropertyKind::monotone) {
          detail::check_one(f, ground, kind, tolerance, b, b, e, report);
          continue;
        }
        // Every A ⊆ B, enumerated as sub-masks of B.
        for (std::uint32_t amask = bmask;; amask = (amask - 1) & bmask) {
          detail::check_one(f, ground, kind, tolerance, detail::subset_from_mask(ground, amask), b, e, report);
          if (amask == 0) break;
        }
      }
    }
    return report;
  }

  for (std::size_t t = 0; t < trials; ++t) {
    // B: each element with probability 1/2, leaving at least one element out.
    std::vector<std::uint8_t> in_b(n);
    std::size_t b_count = 0;
    do {
      b_count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        in_b[i] = static_cast<std::uint8_t>(rng() & 1U);
        b_count += in_b[i];
      }
    } while (b_count == n);
    Subset a;
    Subset b;
    std::vector<ClientId> outside;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_b[i]) {
        b.push_back(ground[i]);
        if (rng() & 1U) a.push_back(ground[i]);
      } else {
        outside.push_back(ground[i]);
      }
    }
    const ClientId e = outside[static_cast<std::size_t>(uniform_index(rng, outside.size()))];
    if (kind == PropertyKind::monotone)
      detail::check_one(f, ground, kind, tolerance, b, b, e, report);
    else
      detail::check_one(f, ground, kind, tolerance, a, b, e, report);
  }
  return report;
}

}  // namespace fedsubsel
