#pragma once

// FedAvg simulation with pluggable client selection.
//
// Round k:
//   1. select κ clients from the cached (possibly stale) gradients/losses
//   2. each selected client runs E steps of mini-batch SGD from w_k
//   3. w_{k+1} = w_k − (1/κ) Σ delta_i, summed in ascending client id
//   4. selected clients refresh their caches at w_{k+1}
//   5. metrics are recorded for w_{k+1}
//
// Every client's caches are populated at w_0 before round 0.

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <future>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsubsel/client.hpp"
#include "fedsubsel/error.hpp"
#include "fedsubsel/metrics.hpp"
#include "fedsubsel/model.hpp"
#include "fedsubsel/objectives.hpp"
#include "fedsubsel/rng.hpp"
#include "fedsubsel/submodular.hpp"

namespace fedsubsel {

enum class SelectionMethod { subtrunc, unionfl, divfl, random, power_of_choice };

inline std::string_view to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::subtrunc: return "subtrunc";
    case SelectionMethod::unionfl: return "unionfl";
    case SelectionMethod::divfl: return "divfl";
    case SelectionMethod::random: return "random";
    case SelectionMethod::power_of_choice: return "power_of_choice";
  }
  return "?";
}

struct TrainConfig {
  std::size_t rounds = 1;             // K
  std::size_t local_steps = 1;        // E
  std::size_t clients_per_round = 1;  // κ
  std::size_t sample_size = 10;       // r, stochastic greedy candidates
  double learning_rate = 0.01;        // η
  std::size_t batch_size = 32;
  SelectionMethod method = SelectionMethod::subtrunc;
  FairnessParams fairness;
  UnionParams unions;
  std::size_t poc_candidates = 0;  // 0: max(κ, r)
  std::uint64_t seed = 0;
  ModelKind model_kind = ModelKind::logistic;
  std::size_t hidden = 32;
  DissimilarityKind metric = DissimilarityKind::std;
  std::size_t threads = 1;

  std::size_t power_of_choice_candidates() const {
    return poc_candidates ? poc_candidates : std::max(clients_per_round, sample_size);
  }

  void validate(std::size_t n_clients) const {
    if (rounds < 1) throw DomainError("rounds must be >= 1");
    if (local_steps < 1) throw DomainError("local_steps must be >= 1");
    if (clients_per_round < 1 || clients_per_round > n_clients)
      throw DomainError("clients_per_round must lie in [1, " + std::to_string(n_clients) + "]");
    if (sample_size < 1) throw DomainError("sample_size must be >= 1");
    if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    fairness.validate();
    unions.validate();
    if (method == SelectionMethod::power_of_choice &&
        (power_of_choice_candidates() < clients_per_round || power_of_choice_candidates() > n_clients))
      throw DomainError("power-of-choice candidate count must lie in [kappa, n]");
  }
};

struct RoundRecord {
  std::size_t round = 0;
  Subset selected;  // selection order
  double global_train_loss = 0.0;
  std::vector<double> per_client_test_acc;
  double mean_test_acc = 0.0;
  double dissimilarity = 0.0;
  std::size_t unique_participants = 0;  // distinct clients selected so far
  double grad_norm_sq = 0.0;
  double wall_time = 0.0;  // seconds; not deterministic
};

struct SgdParams {
  double learning_rate = 0.01;
  std::size_t steps = 1;
  std::size_t batch_size = 32;
};

// Mini-batches drawn from shuffled passes over [0, n); a pass that runs out
// yields a short final batch and the next batch starts a fresh shuffle.
// Batch indices are returned sorted so a full batch reduces in a fixed order.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, Rng& rng) : n_(n), batch_(batch_size), rng_(&rng) {
    if (n_ == 0) throw DomainError("cannot sample batches from an empty dataset");
    if (batch_ == 0) throw DomainError("batch size must be >= 1");
  }

  std::vector<std::size_t> next() {
    if (pos_ >= perm_.size()) {
      perm_.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
      shuffle(perm_, *rng_);
      pos_ = 0;
    }
    const std::size_t take = std::min(batch_, perm_.size() - pos_);
    std::vector<std::size_t> out(perm_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 perm_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
    pos_ += take;
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t n_;
  std::size_t batch_;
  Rng* rng_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

template <class GradFn>
concept BatchGradient = std::invocable<const GradFn&, std::span<const double>, std::span<const std::size_t>> &&
    std::convertible_to<std::invoke_result_t<const GradFn&, std::span<const double>, std::span<const std::size_t>>,
                        std::vector<double>>;

// E plain SGD steps from w0 on an objective over n_examples rows; returns
// w0 − w_E.
template <BatchGradient GradFn>
std::vector<double> local_sgd(std::span<const double> w0, std::size_t n_examples, const GradFn& grad,
                              const SgdParams& p, Rng& rng) {
  if (p.steps < 1) throw DomainError("local SGD needs at least one step");
  if (n_examples < 1) throw DomainError("local SGD needs at least one training example");
  std::vector<double> w(w0.begin(), w0.end());
  BatchSampler sampler(n_examples, p.batch_size, rng);
  for (std::size_t step = 0; step < p.steps; ++step) {
    const auto rows = sampler.next();
    const std::vector<double> g = grad(std::span<const double>(w), std::span<const std::size_t>(rows));
    if (g.size() != w.size()) throw DomainError("gradient dimension does not match parameters");
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] -= p.learning_rate * g[k];
      if (!std::isfinite(w[k]))
        throw NumericError("non-finite parameter " + std::to_string(k) + " after local step " + std::to_string(step));
    }
  }
  std::vector<double> delta(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) delta[k] = w0[k] - w[k];
  return delta;
}

inline std::vector<double> local_sgd(const ClientState& client, const ModelParams& model, const SgdParams& p, Rng& rng) {
  ModelParams work = model;
  auto grad = [&](std::span<const double> w, std::span<const std::size_t> rows) {
    work.w.assign(w.begin(), w.end());
    return loss_and_grad(work, client.train, rows).grad;
  };
  return local_sgd(model.w, client.train.rows, grad, p, rng);
}

// w − (1/κ) Σ deltas, summing in the order given (callers pass ascending
// client id).
inline ModelParams aggregate(const ModelParams& model, std::span<const std::vector<double>> deltas, std::size_t kappa) {
  if (deltas.size() != kappa)
    throw DomainError("expected " + std::to_string(kappa) + " deltas, got " + std::to_string(deltas.size()));
  std::vector<double> sum(model.w.size(), 0.0);
  for (const auto& d : deltas) {
    if (d.size() != model.w.size()) throw DomainError("delta dimension does not match the model");
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += d[k];
  }
  ModelParams out = model;
  const double inv = 1.0 / static_cast<double>(kappa);
  for (std::size_t k = 0; k < sum.size(); ++k) out.w[k] = model.w[k] - inv * sum[k];
  return out;
}

// Recomputes full-training-split gradient and loss at `model` for `selected`.
inline void refresh_caches(std::span<ClientState> clients, std::span<const ClientId> selected, const ModelParams& model,
                           bool count_participation = true) {
  model.validate();
  for (ClientId id : selected) {
    if (id >= clients.size()) throw DomainError("client " + std::to_string(id) + " does not exist");
    ClientState& c = clients[id];
    LossGrad lg = loss_and_grad(model, c.train);
    c.cached_gradient = std::move(lg.grad);
    c.cached_loss = lg.loss;
    if (count_participation) ++c.participation_count;
  }
}

inline void warm_up(std::span<ClientState> clients, const ModelParams& model) {
  std::vector<ClientId> all(clients.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  refresh_caches(clients, all, model, false);
}

struct TrainingResult {
  std::vector<RoundRecord> records;
  ModelParams final_model;
  SelectionHistory history;
};

namespace detail {

inline constexpr std::uint64_t kSelectionStream = 0x5e1ec7;
inline constexpr std::uint64_t kInitStream = 0x1417;

inline Subset select_clients(const TrainConfig& cfg, std::span<const ClientState> clients,
                             const SelectionHistory& history, std::size_t round, Rng& rng) {
  const std::size_t n = clients.size();
  const GroundSet ground = GroundSet::range(n);
  std::vector<double> loss_values(n);
  for (std::size_t i = 0; i < n; ++i) loss_values[i] = *clients[i].cached_loss;
  const LossVector losses(std::move(loss_values));

  switch (cfg.method) {
    case SelectionMethod::random:
      return select_random(ground, cfg.clients_per_round, rng);
    case SelectionMethod::power_of_choice:
      return select_power_of_choice(losses, cfg.clients_per_round, cfg.power_of_choice_candidates(), rng);
    default:
      break;
  }

  std::vector<std::vector<double>> grads(n);
  for (std::size_t i = 0; i < n; ++i) grads[i] = *clients[i].cached_gradient;
  const DistanceTable table = build_distance_table(grads);
  const std::size_t kappa = cfg.clients_per_round;
  const std::size_t r = cfg.sample_size;
  switch (cfg.method) {
    case SelectionMethod::divfl:
      return stochastic_greedy_maximize(FacilityLocation{&table}, ground, kappa, r, rng);
    case SelectionMethod::subtrunc:
      return stochastic_greedy_maximize(SubTrunc{&table, &losses, cfg.fairness}, ground, kappa, r, rng);
    case SelectionMethod::unionfl:
      return stochastic_greedy_maximize(UnionFL(table, history, cfg.unions, round), ground, kappa, r, rng);
    default:
      break;
  }
  throw DomainError("unknown selection method");
}

}  // namespace detail

// Runs warm-up plus K rounds. `clients[i].id` must equal i. Results depend
// only on the config (including seed) and client data, not on cfg.threads.
inline TrainingResult run_training(const TrainConfig& cfg, std::vector<ClientState>& clients) {
  if (clients.empty()) throw DomainError("no clients");
  cfg.validate(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) {
    if (clients[i].id != i) throw DomainError("client ids must equal their position");
    if (clients[i].train.rows == 0 || clients[i].test.rows == 0)
      throw DomainError("client " + std::to_string(i) + " has an empty train or test split");
  }

  const ModelShape shape{clients.front().train.cols, clients.front().train.classes, cfg.hidden};
  TrainingResult result{{}, init_model(cfg.model_kind, shape, derive_seed(cfg.seed, {detail::kInitStream})),
                        SelectionHistory(cfg.unions.window)};
  ModelParams& model = result.final_model;
  warm_up(clients, model);

  const SgdParams sgd{cfg.learning_rate, cfg.local_steps, cfg.batch_size};
  std::vector<bool> ever(clients.size(), false);
  std::size_t unique = 0;

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Rng select_rng = make_rng(cfg.seed, {round, detail::kSelectionStream});
      Subset selected = detail::select_clients(cfg, clients, result.history, round, select_rng);
      if (selected.size() != cfg.clients_per_round) throw DomainError("selection returned the wrong number of clients");
      result.history.append(selected);

      Subset ascending = sorted_copy(selected);
      std::vector<std::vector<double>> deltas(ascending.size());
      auto work = [&](std::size_t slot) {
        const ClientId id = ascending[slot];
        Rng rng = make_rng(cfg.seed, {round, id});
        deltas[slot] = local_sgd(clients[id], model, sgd, rng);
      };
      const std::size_t threads = std::max<std::size_t>(1, cfg.threads);
      if (threads == 1) {
        for (std::size_t s = 0; s < ascending.size(); ++s) work(s);
      } else {
        for (std::size_t begin = 0; begin < ascending.size(); begin += threads) {
          std::vector<std::future<void>> jobs;
          for (std::size_t s = begin; s < std::min(ascending.size(), begin + threads); ++s)
            jobs.push_back(std::async(std::launch::async, work, s));
          for (auto& j : jobs) j.get();
        }
      }

      model = aggregate(model, deltas, cfg.clients_per_round);
      model.validate();
      refresh_caches(clients, ascending, model);

      const GlobalEvaluation ev = evaluate_global(model, clients, cfg.metric);
      for (ClientId id : selected)
        if (!ever[id]) {
          ever[id] = true;
          ++unique;
        }
      RoundRecord rec;
      rec.round = round;
      rec.selected = std::move(selected);
      rec.global_train_loss = ev.global_train_loss;
      rec.per_client_test_acc = ev.report.per_client_acc;
      rec.mean_test_acc = ev.report.mean_acc;
      rec.dissimilarity = ev.report.dissimilarity;
      rec.unique_participants = unique;
      rec.grad_norm_sq = ev.grad_norm_sq;
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.records.push_back(std::move(rec));
    } catch (const NumericError& e) {
      throw NumericError("round " + std::to_string(round) + ": " + e.what());
    } catch (const DomainError& e) {
      throw DomainError("round " + std::to_string(round) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("round " + std::to_string(round) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace fedsubsel
