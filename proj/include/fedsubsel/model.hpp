#pragma once

// Desk-scale classifiers with closed-form gradients, stored as one flat
// parameter vector.
//
// multinomial logistic:  [ W (classes×input) | b (classes) ]
// one-hidden-layer MLP:  [ W1 (hidden×input) | b1 (hidden) | W2 (classes×hidden) | b2 (classes) ], tanh hidden units
//
// Loss is the mean softmax cross-entropy over the batch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsubsel/dataset.hpp"
#include "fedsubsel/error.hpp"
#include "fedsubsel/rng.hpp"

namespace fedsubsel {

enum class ModelKind { logistic, mlp };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::logistic ? "logistic" : "mlp"; }

struct ModelShape {
  std::size_t input_dim = 0;
  std::size_t classes = 0;
  std::size_t hidden = 32;  // mlp only
};

inline std::size_t parameter_count(ModelKind kind, const ModelShape& s) {
  if (kind == ModelKind::logistic) return s.classes * s.input_dim + s.classes;
  return s.hidden * s.input_dim + s.hidden + s.classes * s.hidden + s.classes;
}

struct ModelParams {
  ModelKind kind = ModelKind::logistic;
  ModelShape shape;
  std::vector<double> w;

  void validate() const {
    if (shape.input_dim == 0 || shape.classes < 2) throw DomainError("model needs input_dim >= 1 and classes >= 2");
    if (kind == ModelKind::mlp && shape.hidden == 0) throw DomainError("mlp needs a positive hidden width");
    if (w.size() != parameter_count(kind, shape))
      throw DomainError("parameter vector has " + std::to_string(w.size()) + " entries, shape implies " +
                        std::to_string(parameter_count(kind, shape)));
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!std::isfinite(w[i])) throw NumericError("non-finite model parameter at index " + std::to_string(i));
  }
};

// Logistic weights start at zero; MLP weights are uniform in ±1/sqrt(fan_in).
inline ModelParams init_model(ModelKind kind, const ModelShape& shape, std::uint64_t seed) {
  ModelParams m{kind, shape, std::vector<double>(parameter_count(kind, shape), 0.0)};
  if (kind == ModelKind::mlp) {
    Rng rng = make_rng(seed, {0x1417});
    const double a1 = 1.0 / std::sqrt(static_cast<double>(shape.input_dim));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
    const std::size_t n1 = shape.hidden * shape.input_dim;
    const std::size_t off2 = n1 + shape.hidden;
    for (std::size_t i = 0; i < n1; ++i) m.w[i] = a1 * (2.0 * uniform_unit(rng) - 1.0);
    for (std::size_t i = 0; i < shape.classes * shape.hidden; ++i) m.w[off2 + i] = a2 * (2.0 * uniform_unit(rng) - 1.0);
  }
  m.validate();
  return m;
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

namespace detail {

// In place: logits -> probabilities; returns -log p[label].
inline double softmax_xent(std::span<double> z, int label) {
  const double zy = z[static_cast<std::size_t>(label)];
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return std::log(sum) + zmax - zy;
}

inline void forward_logits(const ModelParams& m, std::span<const double> x, std::span<double> z, std::span<double> h) {
  const auto& s = m.shape;
  const double* w = m.w.data();
  if (m.kind == ModelKind::logistic) {
    const double* b = w + s.classes * s.input_dim;
    for (std::size_t c = 0; c < s.classes; ++c) {
      double acc = b[c];
      for (std::size_t k = 0; k < s.input_dim; ++k) acc += w[c * s.input_dim + k] * x[k];
      z[c] = acc;
    }
    return;
  }
  const double* b1 = w + s.hidden * s.input_dim;
  const double* w2 = b1 + s.hidden;
  const double* b2 = w2 + s.classes * s.hidden;
  for (std::size_t j = 0; j < s.hidden; ++j) {
    double acc = b1[j];
    for (std::size_t k = 0; k < s.input_dim; ++k) acc += w[j * s.input_dim + k] * x[k];
    h[j] = std::tanh(acc);
  }
  for (std::size_t c = 0; c < s.classes; ++c) {
    double acc = b2[c];
    for (std::size_t j = 0; j < s.hidden; ++j) acc += w2[c * s.hidden + j] * h[j];
    z[c] = acc;
  }
}

inline void check_batch(const ModelParams& m, const LabeledDataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw DomainError("batch must be non-empty");
  if (data.cols != m.shape.input_dim)
    throw DomainError("batch has " + std::to_string(data.cols) + " features, model expects " +
                      std::to_string(m.shape.input_dim));
  for (std::size_t r : rows) {
    if (r >= data.rows) throw DomainError("batch row " + std::to_string(r) + " out of range");
    if (data.labels[r] < 0 || static_cast<std::size_t>(data.labels[r]) >= m.shape.classes)
      throw DomainError("label " + std::to_string(data.labels[r]) + " outside the model's classes");
  }
}

}  // namespace detail

// Mean cross-entropy over `rows` of `data` and its exact gradient.
inline LossGrad loss_and_grad(const ModelParams& m, const LabeledDataset& data, std::span<const std::size_t> rows) {
  detail::check_batch(m, data, rows);
  const auto& s = m.shape;
  LossGrad out;
  out.grad.assign(m.w.size(), 0.0);
  std::vector<double> z(s.classes), h(m.kind == ModelKind::mlp ? s.hidden : 0), dh(h.size());
  double* g = out.grad.data();
  for (std::size_t r : rows) {
    const auto x = data.row(r);
    const int y = data.labels[r];
    detail::forward_logits(m, x, z, h);
    out.loss += detail::softmax_xent(z, y);
    z[static_cast<std::size_t>(y)] -= 1.0;  // z now holds dL/dlogits
    if (m.kind == ModelKind::logistic) {
      double* gb = g + s.classes * s.input_dim;
      for (std::size_t c = 0; c < s.classes; ++c) {
        for (std::size_t k = 0; k < s.input_dim; ++k) g[c * s.input_dim + k] += z[c] * x[k];
        gb[c] += z[c];
      }
      continue;
    }
    const double* w2 = m.w.data() + s.hidden * s.input_dim + s.hidden;
    double* gb1 = g + s.hidden * s.input_dim;
    double* gw2 = gb1 + s.hidden;
    double* gb2 = gw2 + s.classes * s.hidden;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t c = 0; c < s.classes; ++c) {
      for (std::size_t j = 0; j < s.hidden; ++j) {
        gw2[c * s.hidden + j] += z[c] * h[j];
        dh[j] += w2[c * s.hidden + j] * z[c];
      }
      gb2[c] += z[c];
    }
    for (std::size_t j = 0; j < s.hidden; ++j) {
      const double da = dh[j] * (1.0 - h[j] * h[j]);
      for (std::size_t k = 0; k < s.input_dim; ++k) g[j * s.input_dim + k] += da * x[k];
      gb1[j] += da;
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  out.loss *= inv;
  for (double& v : out.grad) v *= inv;
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  for (std::size_t i = 0; i < out.grad.size(); ++i)
    if (!std::isfinite(out.grad[i])) throw NumericError("non-finite gradient at index " + std::to_string(i));
  out.loss = std::max(out.loss, 0.0);
  return out;
}

inline std::vector<std::size_t> all_rows(const LabeledDataset& data) {
  std::vector<std::size_t> rows(data.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

inline LossGrad loss_and_grad(const ModelParams& m, const LabeledDataset& data) {
  return loss_and_grad(m, data, all_rows(data));
}

inline std::size_t predict(const ModelParams& m, std::span<const double> x) {
  std::vector<double> z(m.shape.classes), h(m.kind == ModelKind::mlp ? m.shape.hidden : 0);
  detail::forward_logits(m, x, z, h);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

// Percentage of correctly classified rows, in [0, 100].
inline double accuracy_percent(const ModelParams& m, const LabeledDataset& data) {
  if (data.rows == 0) throw DomainError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.rows; ++r)
    correct += predict(m, data.row(r)) == static_cast<std::size_t>(data.labels[r]) ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.rows);
}

// Smoothness estimate for softmax regression: ¼ · max ‖(x, 1)‖².
inline double estimate_smoothness(std::span<const LabeledDataset* const> datasets) {
  double best = 0.0;
  for (const auto* d : datasets)
    for (std::size_t r = 0; r < d->rows; ++r) {
      double n2 = 1.0;
      for (double v : d->row(r)) n2 += v * v;
      best = std::max(best, n2);
    }
  return 0.25 * best;
}

}  // namespace fedsubsel
