#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsubsel/client.hpp"
#include "fedsubsel/error.hpp"
#include "fedsubsel/model.hpp"
#include "fedsubsel/objectives.hpp"
#include "fedsubsel/rng.hpp"

namespace fedsubsel {

// Spread statistic over per-client test accuracies. `std` is the population
// standard deviation and is the default everywhere.
enum class DissimilarityKind { std, range, mean_pairwise };

inline std::string_view to_string(DissimilarityKind k) {
  switch (k) {
    case DissimilarityKind::std: return "std";
    case DissimilarityKind::range: return "range";
    case DissimilarityKind::mean_pairwise: return "mean_pairwise";
  }
  return "?";
}

inline double client_dissimilarity(std::span<const double> acc, DissimilarityKind kind = DissimilarityKind::std) {
  if (acc.empty()) throw DomainError("dissimilarity of an empty accuracy vector");
  const auto n = static_cast<double>(acc.size());
  switch (kind) {
    case DissimilarityKind::std: {
      double mean = 0.0;
      for (double a : acc) mean += a;
      mean /= n;
      double var = 0.0;
      for (double a : acc) var += (a - mean) * (a - mean);
      return std::sqrt(var / n);
    }
    case DissimilarityKind::range: {
      auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
      return *hi - *lo;
    }
    case DissimilarityKind::mean_pairwise: {
      if (acc.size() < 2) return 0.0;
      double sum = 0.0;
      for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = i + 1; j < acc.size(); ++j) sum += std::abs(acc[i] - acc[j]);
      return sum / (n * (n - 1.0) / 2.0);
    }
  }
  return 0.0;
}

struct DissimilarityReport {
  std::vector<double> per_client_acc;  // percent
  double dissimilarity = 0.0;          // percentage points
  double mean_acc = 0.0;               // percent
};

struct GlobalEvaluation {
  DissimilarityReport report;
  double global_train_loss = 0.0;  // unweighted mean of client full-train losses
  double grad_norm_sq = 0.0;       // ‖mean of client full-train gradients‖²
};

// Evaluates one global model on every client. Reductions run in client order.
inline GlobalEvaluation evaluate_global(const ModelParams& m, std::span<const ClientState> clients,
                                        DissimilarityKind kind = DissimilarityKind::std) {
  if (clients.empty()) throw DomainError("no clients to evaluate");
  GlobalEvaluation ev;
  std::vector<double> grad(m.w.size(), 0.0);
  for (const auto& c : clients) {
    if (c.test.rows == 0) throw DomainError("client " + std::to_string(c.id) + " has no test data");
    ev.report.per_client_acc.push_back(accuracy_percent(m, c.test));
    const LossGrad lg = loss_and_grad(m, c.train);
    ev.global_train_loss += lg.loss;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += lg.grad[k];
  }
  const auto n = static_cast<double>(clients.size());
  ev.global_train_loss /= n;
  for (double g : grad) ev.grad_norm_sq += (g / n) * (g / n);
  double mean = 0.0;
  for (double a : ev.report.per_client_acc) mean += a;
  ev.report.mean_acc = mean / n;
  ev.report.dissimilarity = client_dissimilarity(ev.report.per_client_acc, kind);
  return ev;
}

struct ParticipationStats {
  std::vector<std::size_t> counts;
  std::size_t unique_participants = 0;
  std::size_t max_min_gap = 0;
};

inline ParticipationStats participation_stats(const SelectionHistory& history, std::size_t n) {
  ParticipationStats st;
  st.counts.assign(n, 0);
  for (const auto& s : history.rounds())
    for (ClientId e : s) {
      if (e >= n) throw DomainError("history mentions client " + std::to_string(e) + " beyond " + std::to_string(n));
      ++st.counts[e];
    }
  for (std::size_t c : st.counts) st.unique_participants += c > 0 ? 1 : 0;
  if (n > 0) {
    auto [lo, hi] = std::minmax_element(st.counts.begin(), st.counts.end());
    st.max_min_gap = *hi - *lo;
  }
  return st;
}

// Output-iterate distribution P(k) ∝ (1+ζ)^(K−1−k), ζ = η²L²E² · (9ηLE/4).
struct ConvergenceParams {
  double smoothness = 1.0;  // L
  std::size_t local_steps = 1;
  std::size_t rounds = 1;
  double learning_rate = 0.0;

  double zeta() const {
    const double a = learning_rate * smoothness * static_cast<double>(local_steps);
    return a * a * (9.0 * a / 4.0);
  }
};

// η = 1 / (L E √K)
inline double scaled_learning_rate(double smoothness, std::size_t local_steps, std::size_t rounds) {
  if (!(smoothness > 0.0) || local_steps == 0 || rounds == 0)
    throw DomainError("scaled learning rate needs L > 0, E >= 1, K >= 1");
  return 1.0 / (smoothness * static_cast<double>(local_steps) * std::sqrt(static_cast<double>(rounds)));
}

inline std::vector<double> output_round_distribution(const ConvergenceParams& p) {
  if (p.rounds < 1) throw DomainError("need at least one round");
  const double log_base = std::log1p(p.zeta());
  const std::size_t K = p.rounds;
  std::vector<double> w(K);
  double total = 0.0;
  // Relative to the largest weight (k = 0) so large K cannot overflow.
  for (std::size_t k = 0; k < K; ++k) {
    w[k] = std::exp(-static_cast<double>(k) * log_base);
    total += w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

inline std::size_t sample_output_round(const ConvergenceParams& p, Rng& rng) {
  const auto probs = output_round_distribution(p);
  const double u = uniform_unit(rng);
  double cum = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    cum += probs[k];
    if (u < cum) return k;
  }
  return probs.size() - 1;
}

}  // namespace fedsubsel
