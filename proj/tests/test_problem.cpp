#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "loopless/problem.hpp"
#include "support.hpp"

using namespace loopless;
using namespace testing_support;

namespace {

CompositeProblem dense_problem(const std::vector<std::vector<double>>& rows, std::vector<double> labels, LossKind kind,
                               double l1 = 0.0, double l2 = 0.0) {
  return CompositeProblem(DesignMatrix::from_dense(rows), std::move(labels), kind, l1, l2);
}

// argmin_y (v - y)^2 / (2 eta) + l1 |y| + l2/2 y^2 by golden-section search.
double golden_prox(double v, double eta, double l1, double l2) {
  auto obj = [&](double y) { return (v - y) * (v - y) / (2 * eta) + l1 * std::abs(y) + 0.5 * l2 * y * y; };
  double a = -std::abs(v) - 1.0, b = std::abs(v) + 1.0;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (obj(c) < obj(d)) b = d;
    else a = c;
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  return 0.5 * (a + b);
}

// Distance of 0 from the subdifferential of the prox objective at y.
double prox_residual(double y, double v, double eta, double l1, double l2) {
  const double smooth = (y - v) / eta + l2 * y;
  if (y != 0.0) return std::abs(smooth + l1 * (y > 0 ? 1.0 : -1.0));
  return std::max(0.0, std::abs(smooth) - l1);
}

// Golden-section compares objective values, so it only resolves y to about sqrt(eps).
constexpr double kGoldenTol = 1e-6;

double largest_eigenvalue(const CompositeProblem& problem) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(problem.n(), problem.d());
  for (std::size_t i = 0; i < problem.n(); ++i) {
    for (const auto& e : problem.data().row(i)) A(i, e.index) = e.value;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.transpose() * A);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

TEST(DesignMatrix, RowNormsAndValidation) {
  DesignMatrix m(4, {{{0, 1.0}, {3, -2.0}}, {}, {{2, 0.5}}});
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.nnz(), 3u);
  EXPECT_DOUBLE_EQ(m.row_norm_sq(0), 5.0);
  EXPECT_DOUBLE_EQ(m.row_norm_sq(1), 0.0);
  EXPECT_THROW(DesignMatrix(2, {{{0, 1.0}, {2, 1.0}}}), std::invalid_argument);
  EXPECT_THROW(DesignMatrix(3, {{{1, 1.0}, {1, 1.0}}}), std::invalid_argument);
  EXPECT_THROW(DesignMatrix(3, {{{2, 1.0}, {1, 1.0}}}), std::invalid_argument);
}

TEST(ComponentGradient, Examples) {
  auto p = dense_problem({{0.0, 0.0}, {1.0, 0.0}}, {1.0, 1.0}, LossKind::Logistic);
  const std::vector<double> x{0.0, 0.0};
  const auto g0 = component_gradient(p, 0, x);
  for (const auto& e : g0) EXPECT_EQ(e.value, 0.0);
  const auto g1 = component_gradient(p, 1, x);
  ASSERT_EQ(g1.size(), 1u);
  EXPECT_EQ(g1[0].index, 0u);
  EXPECT_DOUBLE_EQ(g1[0].value, -0.5);
  EXPECT_THROW(component_gradient(p, 2, x), std::out_of_range);

  auto q = dense_problem({{2.0}}, {1.0}, LossKind::Squared);
  const std::vector<double> x1{1.0};
  const auto g = component_gradient(q, 0, x1);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g[0].value, 2.0);
  const double h = 1e-6;
  const std::vector<double> xp{1.0 + h}, xm{1.0 - h};
  EXPECT_NEAR((q.component_value(0, xp) - q.component_value(0, xm)) / (2 * h), 2.0, 1e-6);
}

TEST(FullGradient, ZeroAtSeparableOptimum) {
  // rows (1,0) and (0,2) with targets 3 and 4: normal equations give x = (3, 2).
  auto p = dense_problem({{1.0, 0.0}, {0.0, 2.0}}, {3.0, 4.0}, LossKind::Squared);
  const auto g = full_gradient(p, std::vector<double>{3.0, 2.0});
  EXPECT_NEAR(g[0], 0.0, 1e-10);
  EXPECT_NEAR(g[1], 0.0, 1e-10);
}

TEST(FullGradient, SingleExampleMatchesComponent) {
  auto p = dense_problem({{0.3, -1.2}}, {1.0}, LossKind::Logistic);
  const std::vector<double> x{0.7, 0.1};
  const auto full = full_gradient(p, x);
  const auto comp = component_gradient(p, 0, x);
  EXPECT_DOUBLE_EQ(full[0], comp[0].value);
  EXPECT_DOUBLE_EQ(full[1], comp[1].value);
}

TEST(FullGradient, MatchesFiniteDifferencesForAllLosses) {
  Rng rng(11);
  for (auto kind : {LossKind::Logistic, LossKind::Squared, LossKind::SigmoidSquared}) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 3, d = 2;
      auto p = random_problem(rng, n, d, kind);
      auto x = random_vector(rng, d);
      const auto g = full_gradient(p, x);
      const double h = 1e-6;
      for (std::size_t j = 0; j < d; ++j) {
        auto xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const double fd = (p.f(xp) - p.f(xm)) / (2 * h);
        EXPECT_LE(std::abs(fd - g[j]), 1e-5 * std::max(1.0, std::abs(g[j]))) << to_string(kind);
      }
    }
  }
}

TEST(Prox, Examples) {
  auto none = dense_problem({{1.0}}, {1.0}, LossKind::Squared);
  EXPECT_EQ(prox_psi(none, 0.7, std::vector<double>{-1.5})[0], -1.5);
  auto lasso = dense_problem({{1.0}}, {1.0}, LossKind::Squared, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(prox_psi(lasso, 1.0, std::vector<double>{3.0})[0], 2.0);
  auto enet = dense_problem({{1.0}}, {1.0}, LossKind::Squared, 2.0, 1.0);
  const double value = prox_psi(enet, 0.5, std::vector<double>{-4.0})[0];
  EXPECT_DOUBLE_EQ(value, -2.0);
  EXPECT_NEAR(golden_prox(-4.0, 0.5, 2.0, 1.0), -2.0, kGoldenTol);
  EXPECT_LE(prox_residual(value, -4.0, 0.5, 2.0, 1.0), 1e-12);
  EXPECT_THROW(prox_psi(enet, 0.0, std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(prox_psi(enet, -1.0, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Prox, MatchesGoldenSectionAndIsNonExpansive) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const double eta = uniform(rng, 0.05, 2.0), l1 = uniform(rng, 0.0, 2.0), l2 = uniform(rng, 0.0, 2.0);
    const double v = uniform(rng, -5.0, 5.0), w = uniform(rng, -5.0, 5.0);
    const double pv = prox_coordinate(v, eta, l1, l2);
    EXPECT_NEAR(pv, golden_prox(v, eta, l1, l2), kGoldenTol);
    EXPECT_LE(prox_residual(pv, v, eta, l1, l2), 1e-12 * (1.0 + std::abs(v) / eta));
    EXPECT_LE(std::abs(pv - prox_coordinate(w, eta, l1, l2)), std::abs(v - w) + 1e-15);
  }
}

TEST(Constants, Examples) {
  auto p = dense_problem({{3.0, 4.0}}, {1.0}, LossKind::Logistic);
  EXPECT_DOUBLE_EQ(p.smoothness(0), 6.25);
  EXPECT_NEAR(p.L_f(), p.smoothness(0), 1e-6 * p.smoothness(0));

  auto id = dense_problem({{1.0, 0.0}, {0.0, 1.0}}, {1.0, -1.0}, LossKind::Logistic);
  EXPECT_NEAR(id.L_f(), 0.125, 1e-6 * 0.125);

  auto sq = dense_problem({{1.0, 1.0}}, {0.5}, LossKind::Squared);
  EXPECT_DOUBLE_EQ(sq.smoothness(0), 2.0);
  auto sig = dense_problem({{1.0, 1.0}}, {1.0}, LossKind::SigmoidSquared);
  EXPECT_DOUBLE_EQ(sig.smoothness(0), 1.0);
}

TEST(Constants, PowerIterationMatchesEigenSolver) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_problem(rng, 12, 5, LossKind::Logistic, 0.0, 0.0, 0.6);
    const double oracle = largest_eigenvalue(p) / (4.0 * 12.0);
    EXPECT_LE(p.L_f(), p.L_bar() * (1 + 1e-10));
    EXPECT_NEAR(p.L_f(), std::min(oracle, p.L_bar()), 1e-6 * oracle);
    EXPECT_EQ(p.mu(), 0.0);
  }
}

TEST(Problem, StrongConvexityFromRidge) {
  auto p = dense_problem({{1.0}}, {1.0}, LossKind::Logistic, 0.0, 0.3);
  EXPECT_EQ(p.mu_f(), 0.0);
  EXPECT_EQ(p.mu_psi(), 0.3);
  EXPECT_GT(p.mu(), 0.0);
}

TEST(Problem, LabelCoercion) {
  auto p = dense_problem({{1.0}, {1.0}}, {0.0, 1.0}, LossKind::Logistic);
  EXPECT_EQ(p.labels()[0], -1.0);
  auto s = dense_problem({{1.0}, {1.0}}, {-1.0, 1.0}, LossKind::SigmoidSquared);
  EXPECT_EQ(s.labels()[0], 0.0);
  EXPECT_THROW(dense_problem({{1.0}}, {2.0}, LossKind::Logistic), std::invalid_argument);
}

TEST(Problem, ConvexityCertificate) {
  Rng rng(8);
  for (auto kind : {LossKind::Logistic, LossKind::Squared}) {
    for (int trial = 0; trial < 50; ++trial) {
      auto p = random_problem(rng, 6, 3, kind);
      auto x = random_vector(rng, 3), y = random_vector(rng, 3);
      const auto gy = full_gradient(p, y);
      double inner = 0.0;
      for (std::size_t j = 0; j < 3; ++j) inner += gy[j] * (x[j] - y[j]);
      const double breg = p.f(x) - p.f(y) - inner;
      const double scale = 1e-10 * (1.0 + std::abs(p.f(x)) + std::abs(p.f(y)));
      EXPECT_GE(breg, -scale);
      EXPECT_LE(breg, p.L_f() / 2 * distance_sq(x, y) + scale);
    }
  }
}

TEST(GradTable, AggregateMatchesScratchSum) {
  Rng rng(3);
  auto p = random_problem(rng, 9, 4, LossKind::Logistic, 0.0, 0.0, 0.5);
  GradTable table;
  for (int refresh = 0; refresh < 5; ++refresh) {
    const auto w = random_vector(rng, 4);
    table.refresh(p, w);
    std::vector<double> scratch(4, 0.0);
    for (std::size_t i = 0; i < p.n(); ++i) {
      EXPECT_DOUBLE_EQ(table.derivative(i), p.derivative(i, w));
      for (const auto& e : component_gradient(p, i, w)) scratch[e.index] += e.value / 9.0;
    }
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(table.aggregate()[j], scratch[j], 1e-12 * std::max(1.0, std::abs(scratch[j])));
    }
  }
}

TEST(Problem, PermutedKeepsObjective) {
  Rng rng(4);
  auto p = random_problem(rng, 7, 3, LossKind::Logistic, 0.1, 0.2);
  const std::vector<std::size_t> order{3, 1, 6, 0, 2, 5, 4};
  auto q = p.permuted(order);
  const auto x = random_vector(rng, 3);
  EXPECT_NEAR(p.objective(x), q.objective(x), 1e-14);
  EXPECT_EQ(q.labels()[0], p.labels()[3]);
}
