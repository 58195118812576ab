#include "loopless/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace loopless {

DesignMatrix::DesignMatrix(std::size_t cols, std::vector<std::vector<SparseEntry>> rows)
    : cols_(cols) {
  row_ptr_.reserve(rows.size() + 1);
  norms_sq_.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      const auto& e = rows[i][k];
      if (e.index >= cols) {
        throw std::invalid_argument("row " + std::to_string(i) + ": feature index " +
                                    std::to_string(e.index) + " out of range [0, " +
                                    std::to_string(cols) + ")");
      }
      if (k > 0 && rows[i][k - 1].index >= e.index) {
        throw std::invalid_argument("row " + std::to_string(i) +
                                    ": feature indices must be strictly increasing");
      }
      norm_sq += e.value * e.value;
      entries_.push_back(e);
    }
    row_ptr_.push_back(entries_.size());
    norms_sq_.push_back(norm_sq);
  }
}

DesignMatrix DesignMatrix::from_dense(const std::vector<std::vector<double>>& dense) {
  std::size_t cols = dense.empty() ? 0 : dense.front().size();
  std::vector<std::vector<SparseEntry>> rows(dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i].size() != cols) throw std::invalid_argument("ragged dense matrix");
    for (std::size_t j = 0; j < cols; ++j) {
      if (dense[i][j] != 0.0) rows[i].push_back({j, dense[i][j]});
    }
  }
  return DesignMatrix(cols, std::move(rows));
}

double DesignMatrix::dot_row(std::size_t i, std::span<const double> x) const {
  double s = 0.0;
  for (const auto& e : row(i)) s += e.value * x[e.index];
  return s;
}

void DesignMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < rows(); ++i) y[i] = dot_row(i, x);
}

void DesignMatrix::multiply_transpose(std::span<const double> y, std::span<double> x) const {
  std::fill(x.begin(), x.end(), 0.0);
  for (std::size_t i = 0; i < rows(); ++i) {
    for (const auto& e : row(i)) x[e.index] += e.value * y[i];
  }
}

DesignMatrix DesignMatrix::permuted(std::span<const std::size_t> order) const {
  std::vector<std::vector<SparseEntry>> rows;
  rows.reserve(order.size());
  for (std::size_t k : order) {
    auto r = row(k);
    rows.emplace_back(r.begin(), r.end());
  }
  return DesignMatrix(cols_, std::move(rows));
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Logistic:
      return "logistic";
    case LossKind::Squared:
      return "squared";
    case LossKind::SigmoidSquared:
      return "sigmoid-squared";
  }
  return "unknown";
}

namespace loss {
namespace {
double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}
}  // namespace

double value(LossKind kind, double t, double y) {
  switch (kind) {
    case LossKind::Logistic: {
      const double z = -y * t;
      return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
    case LossKind::Squared:
      return 0.5 * (t - y) * (t - y);
    case LossKind::SigmoidSquared: {
      const double r = sigmoid(t) - y;
      return r * r;
    }
  }
  return 0.0;
}

double derivative(LossKind kind, double t, double y) {
  switch (kind) {
    case LossKind::Logistic:
      // -y / (1 + exp(y t)) = -y sigmoid(-y t)
      return -y * sigmoid(-y * t);
    case LossKind::Squared:
      return t - y;
    case LossKind::SigmoidSquared: {
      const double s = sigmoid(t);
      return 2.0 * (s - y) * s * (1.0 - s);
    }
  }
  return 0.0;
}

double gamma(LossKind kind) {
  switch (kind) {
    case LossKind::Logistic:
      return 4.0;
    case LossKind::Squared:
      return 1.0;
    case LossKind::SigmoidSquared:
      return 2.0;  // |phi''| <= 0.5, conservative
  }
  return 1.0;
}
}  // namespace loss

SmoothnessConstants estimate_constants(const DesignMatrix& data, LossKind kind) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  const double g = loss::gamma(kind);
  SmoothnessConstants out;
  out.component.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.component[i] = data.row_norm_sq(i) / g;
  if (n == 0 || d == 0) return out;
  const double L_bar = std::accumulate(out.component.begin(), out.component.end(), 0.0) / n;
  if (L_bar == 0.0) return out;

  // Power iteration on A^T A with a fixed pseudo-random start.
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  std::vector<double> v(d), av(n), u(d);
  for (auto& x : v) x = normal(rng);
  double nv = std::sqrt(norm_sq(v));
  for (auto& x : v) x /= nv;

  constexpr int kMaxIterations = 1000;
  constexpr double kTolerance = 1e-10;
  double rayleigh = 0.0;
  bool converged = false;
  for (int it = 0; it < kMaxIterations; ++it) {
    data.multiply(v, av);
    const double next = norm_sq(av);
    data.multiply_transpose(av, u);
    const double nu = std::sqrt(norm_sq(u));
    if (nu == 0.0) {
      rayleigh = 0.0;
      converged = true;
      break;
    }
    for (std::size_t j = 0; j < d; ++j) v[j] = u[j] / nu;
    if (it > 0 && std::abs(next - rayleigh) <= kTolerance * next) {
      rayleigh = next;
      converged = true;
      break;
    }
    rayleigh = next;
  }
  out.global = converged ? std::min(rayleigh / (g * n), L_bar) : L_bar;
  return out;
}

namespace {
std::vector<double> coerce_labels(std::vector<double> labels, LossKind kind) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double& y = labels[i];
    switch (kind) {
      case LossKind::Logistic:
        if (y == 0.0) y = -1.0;
        if (y != 1.0 && y != -1.0) {
          throw std::invalid_argument("logistic label at example " + std::to_string(i) +
                                      " must be in {-1, +1} or {0, 1}");
        }
        break;
      case LossKind::SigmoidSquared:
        if (y == -1.0) y = 0.0;
        if (y != 0.0 && y != 1.0) {
          throw std::invalid_argument("sigmoid-squared label at example " + std::to_string(i) +
                                      " must be in {0, 1} or {-1, +1}");
        }
        break;
      case LossKind::Squared:
        break;
    }
  }
  return labels;
}
}  // namespace

CompositeProblem::CompositeProblem(DesignMatrix data, std::vector<double> labels, LossKind kind,
                                   double lambda1, double lambda2)
    : data_(std::move(data)),
      labels_(coerce_labels(std::move(labels), kind)),
      loss_(kind),
      lambda1_(lambda1),
      lambda2_(lambda2) {
  if (labels_.size() != data_.rows()) {
    throw std::invalid_argument("label count " + std::to_string(labels_.size()) +
                                " does not match example count " + std::to_string(data_.rows()));
  }
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw std::invalid_argument("regularization weights must be nonnegative");
  }
  constants_ = estimate_constants(data_, loss_);
  if (!constants_.component.empty()) {
    L_bar_ = std::accumulate(constants_.component.begin(), constants_.component.end(), 0.0) /
             static_cast<double>(n());
    L_max_ = *std::max_element(constants_.component.begin(), constants_.component.end());
  }
}

double CompositeProblem::derivative(std::size_t i, std::span<const double> x) const {
  return derivative_at_margin(i, data_.dot_row(i, x));
}

double CompositeProblem::component_value(std::size_t i, std::span<const double> x) const {
  return loss::value(loss_, data_.dot_row(i, x), labels_[i]);
}

double CompositeProblem::f(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n(); ++i) s += component_value(i, x);
  return s / static_cast<double>(n());
}

double CompositeProblem::psi(std::span<const double> x) const {
  double l1 = 0.0;
  for (double v : x) l1 += std::abs(v);
  return 0.5 * lambda2_ * norm_sq(x) + lambda1_ * l1;
}

CompositeProblem CompositeProblem::permuted(std::span<const std::size_t> order) const {
  std::vector<double> labels;
  labels.reserve(order.size());
  for (std::size_t k : order) labels.push_back(labels_[k]);
  return CompositeProblem(data_.permuted(order), std::move(labels), loss_, lambda1_, lambda2_);
}

SparseVector component_gradient(const CompositeProblem& problem, std::size_t i,
                                std::span<const double> x) {
  if (i >= problem.n()) {
    throw std::out_of_range("example index " + std::to_string(i) + " out of range [0, " +
                            std::to_string(problem.n()) + ")");
  }
  if (x.size() != problem.d()) throw std::invalid_argument("dimension mismatch");
  const double s = problem.derivative(i, x);
  SparseVector out;
  const auto row = problem.data().row(i);
  out.reserve(row.size());
  for (const auto& e : row) out.push_back({e.index, s * e.value});
  return out;
}

std::vector<double> full_gradient(const CompositeProblem& problem, std::span<const double> x) {
  if (x.size() != problem.d()) throw std::invalid_argument("dimension mismatch");
  std::vector<double> g(problem.d(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(problem.n());
  for (std::size_t i = 0; i < problem.n(); ++i) {
    const double s = problem.derivative(i, x) * inv_n;
    for (const auto& e : problem.data().row(i)) g[e.index] += s * e.value;
  }
  return g;
}

std::vector<double> prox_psi(const CompositeProblem& problem, double eta,
                             std::span<const double> v) {
  if (!(eta > 0.0)) throw std::invalid_argument("prox step size must be positive");
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    out[j] = prox_coordinate(v[j], eta, problem.lambda1(), problem.lambda2());
  }
  return out;
}

double gradient_mapping_norm(const CompositeProblem& problem, std::span<const double> x,
                             double eta) {
  const auto g = full_gradient(problem, x);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double p = prox_coordinate(x[j] - eta * g[j], eta, problem.lambda1(), problem.lambda2());
    const double r = (x[j] - p) / eta;
    s += r * r;
  }
  return std::sqrt(s);
}

void GradTable::refresh(const CompositeProblem& problem, std::span<const double> w) {
  const std::size_t n = problem.n();
  derivatives_.resize(n);
  aggregate_.assign(problem.d(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    derivatives_[i] = problem.derivative(i, w);
    const double s = derivatives_[i] * inv_n;
    for (const auto& e : problem.data().row(i)) aggregate_[e.index] += s * e.value;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double norm_sq(std::span<const double> a) { return dot(a, a); }

double distance_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double r = a[j] - b[j];
    s += r * r;
  }
  return s;
}

}  // namespace loopless
