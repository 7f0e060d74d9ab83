#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsubsel/error.hpp"
#include "fedsubsel/rng.hpp"

namespace fedsubsel {

// Row-major feature matrix with integer class labels in [0, classes).
struct LabeledDataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * cols, cols}; }
  bool empty() const noexcept { return rows == 0; }

  void validate() const {
    if (features.size() != rows * cols) throw DataError("feature matrix size does not match rows*cols");
    if (labels.size() != rows) throw DataError("label count does not match row count");
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
        throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " outside [0, " +
                        std::to_string(classes) + ")");
    for (double v : features)
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }

  // Rows `idx` gathered in the given order.
  LabeledDataset subset(std::span<const std::size_t> idx) const {
    LabeledDataset out;
    out.rows = idx.size();
    out.cols = cols;
    out.classes = classes;
    out.features.reserve(idx.size() * cols);
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) {
      auto r = row(i);
      out.features.insert(out.features.end(), r.begin(), r.end());
      out.labels.push_back(labels[i]);
    }
    return out;
  }
};

// C Gaussian clusters, identity covariance, means on random unit directions
// scaled by `spread`. Rows are class-major: per_class rows of class 0, then 1, ...
inline LabeledDataset generate_synthetic(std::size_t classes, std::size_t dims, std::size_t per_class, double spread,
                                         std::uint64_t seed) {
  if (classes < 2) throw DomainError("synthetic data needs at least 2 classes");
  if (dims < 2) throw DomainError("synthetic data needs at least 2 dimensions");
  if (per_class < 2) throw DomainError("synthetic data needs at least 2 rows per class");
  if (!(spread >= 0.0) || !std::isfinite(spread)) throw DomainError("spread must be finite and non-negative");

  Rng rng = make_rng(seed, {0x5e7d});
  std::vector<double> means(classes * dims);
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (std::size_t k = 0; k < dims; ++k) {
        means[c * dims + k] = standard_normal(rng);
        norm += means[c * dims + k] * means[c * dims + k];
      }
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < dims; ++k) means[c * dims + k] = means[c * dims + k] / norm * spread;
  }

  LabeledDataset ds;
  ds.rows = classes * per_class;
  ds.cols = dims;
  ds.classes = classes;
  ds.features.reserve(ds.rows * dims);
  ds.labels.reserve(ds.rows);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t k = 0; k < dims; ++k) ds.features.push_back(means[c * dims + k] + standard_normal(rng));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

struct PartitionSpec {
  std::size_t n_clients = 100;
  std::size_t classes_per_client = 3;
  double train_fraction = 0.8;
};

struct ClientSplit {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<int> classes;  // sorted
};

// Which classes each client holds: a seeded shuffle of the class labels,
// repeated cyclically, dealt to clients in id order in contiguous blocks of
// classes_per_client.
inline std::vector<std::vector<int>> assign_classes(std::size_t classes, const PartitionSpec& spec, std::uint64_t seed) {
  if (spec.n_clients < 1) throw DataError("partition infeasible: need at least one client");
  if (spec.classes_per_client < 1 || spec.classes_per_client > classes)
    throw DataError("partition infeasible: classes_per_client=" + std::to_string(spec.classes_per_client) +
                    " must be in [1, " + std::to_string(classes) + "]");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw DataError("partition infeasible: train_fraction must lie in (0, 1)");
  std::vector<int> perm(classes);
  for (std::size_t c = 0; c < classes; ++c) perm[c] = static_cast<int>(c);
  Rng rng = make_rng(seed, {0xc1a55});
  shuffle(perm, rng);
  std::vector<std::vector<int>> out(spec.n_clients);
  std::size_t k = 0;
  for (auto& cls : out) {
    for (std::size_t j = 0; j < spec.classes_per_client; ++j) cls.push_back(perm[(k++) % classes]);
    std::sort(cls.begin(), cls.end());
  }
  return out;
}

// Non-iid shard partition: each client receives exactly classes_per_client
// distinct classes; each class's examples are split equally (remainder to the
// lowest client ids) among the clients holding it; each client's share is
// split into train/test stratified by class.
inline std::vector<ClientSplit> shard_partition(const LabeledDataset& ds, const PartitionSpec& spec, std::uint64_t seed) {
  ds.validate();
  const auto assignment = assign_classes(ds.classes, spec, seed);

  std::vector<std::vector<std::size_t>> holders(ds.classes);
  for (std::size_t i = 0; i < assignment.size(); ++i)
    for (int c : assignment[i]) holders[static_cast<std::size_t>(c)].push_back(i);

  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t r = 0; r < ds.rows; ++r) by_class[static_cast<std::size_t>(ds.labels[r])].push_back(r);

  for (std::size_t c = 0; c < ds.classes; ++c) {
    if (holders[c].empty() && !by_class[c].empty())
      throw DataError("partition infeasible: class " + std::to_string(c) + " is assigned to no client (" +
                      std::to_string(spec.n_clients) + " clients x " + std::to_string(spec.classes_per_client) +
                      " classes < " + std::to_string(ds.classes) + " classes)");
    if (!holders[c].empty() && by_class[c].size() < 2 * holders[c].size())
      throw DataError("partition infeasible: class " + std::to_string(c) + " has " +
                      std::to_string(by_class[c].size()) + " examples for " + std::to_string(holders[c].size()) +
                      " clients (need at least 2 per client)");
  }

  std::vector<std::vector<std::size_t>> train_idx(spec.n_clients), test_idx(spec.n_clients);
  Rng rng = make_rng(seed, {0x5a4d});
  for (std::size_t c = 0; c < ds.classes; ++c) {
    auto& rows = by_class[c];
    shuffle(rows, rng);
    const std::size_t h = holders[c].size();
    if (h == 0) continue;
    const std::size_t base = rows.size() / h;
    const std::size_t rem = rows.size() % h;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < h; ++k) {
      const std::size_t take = base + (k < rem ? 1 : 0);
      const std::size_t client = holders[c][k];
      auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(take) * spec.train_fraction + 0.5));
      n_train = std::clamp<std::size_t>(n_train, 1, take - 1);
      for (std::size_t j = 0; j < take; ++j)
        (j < n_train ? train_idx : test_idx)[client].push_back(rows[pos + j]);
      pos += take;
    }
  }

  std::vector<ClientSplit> out(spec.n_clients);
  for (std::size_t i = 0; i < spec.n_clients; ++i) {
    out[i].train = ds.subset(train_idx[i]);
    out[i].test = ds.subset(test_idx[i]);
    out[i].classes = assignment[i];
  }
  return out;
}

}  // namespace fedsubsel
