#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fedsubsel/model.hpp"

namespace fedsubsel {
namespace {

// Loss written out independently of the library's forward pass.
double naive_loss(const ModelParams& m, const LabeledDataset& d, const std::vector<std::size_t>& rows) {
  const auto& s = m.shape;
  double total = 0.0;
  for (std::size_t r : rows) {
    std::vector<double> logits(s.classes);
    if (m.kind == ModelKind::logistic) {
      for (std::size_t c = 0; c < s.classes; ++c) {
        logits[c] = m.w[s.classes * s.input_dim + c];
        for (std::size_t k = 0; k < s.input_dim; ++k) logits[c] += m.w[c * s.input_dim + k] * d.row(r)[k];
      }
    } else {
      std::vector<double> h(s.hidden);
      for (std::size_t j = 0; j < s.hidden; ++j) {
        double a = m.w[s.hidden * s.input_dim + j];
        for (std::size_t k = 0; k < s.input_dim; ++k) a += m.w[j * s.input_dim + k] * d.row(r)[k];
        h[j] = std::tanh(a);
      }
      const std::size_t o = s.hidden * s.input_dim + s.hidden;
      for (std::size_t c = 0; c < s.classes; ++c) {
        logits[c] = m.w[o + s.classes * s.hidden + c];
        for (std::size_t j = 0; j < s.hidden; ++j) logits[c] += m.w[o + c * s.hidden + j] * h[j];
      }
    }
    double z = 0.0;
    for (double v : logits) z += std::exp(v);
    total += std::log(z) - logits[static_cast<std::size_t>(d.labels[r])];
  }
  return total / static_cast<double>(rows.size());
}

LabeledDataset random_data(std::size_t rows, std::size_t cols, std::size_t classes, Rng& rng) {
  LabeledDataset d{rows, cols, classes, {}, {}};
  for (std::size_t i = 0; i < rows * cols; ++i) d.features.push_back(standard_normal(rng));
  for (std::size_t i = 0; i < rows; ++i) d.labels.push_back(static_cast<int>(uniform_index(rng, classes)));
  return d;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

TEST(LossAndGrad, ZeroWeightsBalancedBatch) {
  const LabeledDataset d{2, 2, 2, {1.0, -0.5, 2.0, 0.3}, {0, 1}};
  const ModelParams m = init_model(ModelKind::logistic, {2, 2}, 0);
  const auto lg = loss_and_grad(m, d);
  EXPECT_DOUBLE_EQ(lg.loss, std::numbers::ln2);
  EXPECT_EQ(lg.grad[4], 0.0);
  EXPECT_EQ(lg.grad[5], 0.0);
}

TEST(LossAndGrad, MatchesIndependentLoss) {
  Rng rng(40);
  for (auto kind : {ModelKind::logistic, ModelKind::mlp}) {
    const auto d = random_data(7, 4, 3, rng);
    ModelParams m = init_model(kind, {4, 3, 6}, 1);
    for (double& w : m.w) w = 0.5 * standard_normal(rng);
    EXPECT_NEAR(loss_and_grad(m, d).loss, naive_loss(m, d, iota(7)), 1e-12);
  }
}

// Central differences of the independent loss against the analytic gradient.
TEST(LossAndGrad, FiniteDifferenceOracle) {
  Rng rng(41);
  const double step = 1e-5;
  for (auto kind : {ModelKind::logistic, ModelKind::mlp}) {
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t dim = 2 + uniform_index(rng, 4), classes = 2 + uniform_index(rng, 3);
      const auto d = random_data(3 + uniform_index(rng, 6), dim, classes, rng);
      ModelParams m = init_model(kind, {dim, classes, kind == ModelKind::mlp ? 32u : 0u}, trial);
      for (double& w : m.w) w = 0.5 * standard_normal(rng);
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < d.rows; ++r)
        if (uniform_unit(rng) < 0.7) rows.push_back(r);
      if (rows.empty()) rows.push_back(0);
      const auto g = loss_and_grad(m, d, rows).grad;
      double diff2 = 0.0, norm2 = 0.0;
      for (std::size_t k = 0; k < m.w.size(); ++k) {
        ModelParams up = m, down = m;
        up.w[k] += step;
        down.w[k] -= step;
        const double fd = (naive_loss(up, d, rows) - naive_loss(down, d, rows)) / (2 * step);
        diff2 += (fd - g[k]) * (fd - g[k]);
        norm2 += fd * fd;
      }
      EXPECT_LT(std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-12), 1e-5) << to_string(kind) << " trial " << trial;
    }
  }
}

TEST(LossAndGrad, DuplicatedBatchIsInvariant) {
  Rng rng(42);
  for (auto kind : {ModelKind::logistic, ModelKind::mlp}) {
    const auto d = random_data(5, 3, 3, rng);
    ModelParams m = init_model(kind, {3, 3, 8}, 2);
    for (double& w : m.w) w = standard_normal(rng);
    const std::vector<std::size_t> once{0, 1, 2, 3, 4}, twice{0, 0, 1, 1, 2, 2, 3, 3, 4, 4};
    const auto a = loss_and_grad(m, d, once), b = loss_and_grad(m, d, twice);
    EXPECT_NEAR(a.loss, b.loss, 1e-14);
    for (std::size_t k = 0; k < a.grad.size(); ++k) EXPECT_NEAR(a.grad[k], b.grad[k], 1e-14);
  }
}

TEST(LossAndGrad, NonNegative) {
  Rng rng(43);
  const auto d = random_data(20, 3, 2, rng);
  ModelParams m = init_model(ModelKind::logistic, {3, 2}, 0);
  for (double& w : m.w) w = 20.0 * standard_normal(rng);
  EXPECT_GE(loss_and_grad(m, d).loss, 0.0);
}

TEST(LossAndGrad, Errors) {
  const LabeledDataset d{1, 2, 2, {1.0, 1.0}, {0}};
  const ModelParams m = init_model(ModelKind::logistic, {3, 2}, 0);
  EXPECT_THROW(loss_and_grad(m, d), DomainError);
  const ModelParams ok = init_model(ModelKind::logistic, {2, 2}, 0);
  EXPECT_THROW(loss_and_grad(ok, d, std::vector<std::size_t>{}), DomainError);
  ModelParams huge = ok;
  huge.w[0] = INFINITY;
  EXPECT_THROW(loss_and_grad(huge, d), NumericError);
}

TEST(Model, ParameterCountsAndInit) {
  EXPECT_EQ(parameter_count(ModelKind::logistic, {20, 10}), 210u);
  EXPECT_EQ(parameter_count(ModelKind::mlp, {20, 10, 32}), 32u * 20 + 32 + 10 * 32 + 10);
  const auto a = init_model(ModelKind::mlp, {5, 3, 32}, 9), b = init_model(ModelKind::mlp, {5, 3, 32}, 9);
  EXPECT_EQ(a.w, b.w);
  for (double v : init_model(ModelKind::logistic, {5, 3}, 9).w) EXPECT_EQ(v, 0.0);
}

TEST(Model, AccuracyOfPerfectLinearSeparator) {
  const LabeledDataset d{4, 1, 2, {-2.0, -1.0, 1.0, 2.0}, {0, 0, 1, 1}};
  ModelParams m = init_model(ModelKind::logistic, {1, 2}, 0);
  m.w = {-1.0, 1.0, 0.0, 0.0};
  EXPECT_EQ(accuracy_percent(m, d), 100.0);
  m.w = {1.0, -1.0, 0.0, 0.0};
  EXPECT_EQ(accuracy_percent(m, d), 0.0);
}

TEST(Model, SmoothnessHeuristic) {
  const LabeledDataset a{1, 2, 2, {3.0, 4.0}, {0}}, b{1, 2, 2, {1.0, 0.0}, {1}};
  const std::vector<const LabeledDataset*> ds{&a, &b};
  EXPECT_DOUBLE_EQ(estimate_smoothness(ds), 0.25 * 26.0);
}

}  // namespace
}  // namespace fedsubsel
