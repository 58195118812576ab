#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loopless {

struct SparseEntry {
  std::size_t index;
  double value;
};

using SparseVector = std::vector<SparseEntry>;

/// Row-compressed design matrix. Each row holds strictly increasing feature
/// indices in [0, d). Dense data is stored sparsely as well.
class DesignMatrix {
 public:
  DesignMatrix() = default;

  /// Throws std::invalid_argument when an index is out of range or rows are
  /// not strictly increasing.
  DesignMatrix(std::size_t cols, std::vector<std::vector<SparseEntry>> rows);

  static DesignMatrix from_dense(const std::vector<std::vector<double>>& dense);

  std::size_t rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }

  std::span<const SparseEntry> row(std::size_t i) const {
    return {entries_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  double row_norm_sq(std::size_t i) const { return norms_sq_[i]; }
  std::span<const double> row_norms_sq() const { return norms_sq_; }

  double dot_row(std::size_t i, std::span<const double> x) const;

  /// y = A x (length n).
  void multiply(std::span<const double> x, std::span<double> y) const;
  /// x = A^T y (length d), overwriting x.
  void multiply_transpose(std::span<const double> y, std::span<double> x) const;

  /// Rows reordered so that row k of the result is row order[k] of this.
  DesignMatrix permuted(std::span<const std::size_t> order) const;

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<SparseEntry> entries_;
  std::vector<double> norms_sq_;
};

enum class LossKind {
  Logistic,        // log(1 + exp(-y t)), y in {-1, +1}
  Squared,         // (t - y)^2 / 2
  SigmoidSquared,  // (sigmoid(t) - y)^2, y in {0, 1}; nonconvex
};

const char* to_string(LossKind kind);

namespace loss {
double value(LossKind kind, double t, double y);
double derivative(LossKind kind, double t, double y);
/// gamma such that phi is 1/gamma-smooth.
double gamma(LossKind kind);
}  // namespace loss

struct SmoothnessConstants {
  std::vector<double> component;  // L_i
  double global = 0.0;            // L_f
};

/// L_i = ||a_i||^2 / gamma and L_f = lambda_max(A^T A) / (gamma n) by power
/// iteration, capped at the mean of L_i.
SmoothnessConstants estimate_constants(const DesignMatrix& data, LossKind kind);

/// P(x) = (1/n) sum_i phi_i(a_i^T x) + lambda2/2 ||x||^2 + lambda1 ||x||_1.
/// The ridge term lives in psi, so mu_f = 0 and mu_psi = lambda2.
class CompositeProblem {
 public:
  CompositeProblem(DesignMatrix data, std::vector<double> labels, LossKind kind,
                   double lambda1, double lambda2);

  const DesignMatrix& data() const { return data_; }
  std::span<const double> labels() const { return labels_; }
  LossKind loss() const { return loss_; }
  double lambda1() const { return lambda1_; }
  double lambda2() const { return lambda2_; }
  double gamma() const { return loss::gamma(loss_); }

  std::size_t n() const { return data_.rows(); }
  std::size_t d() const { return data_.cols(); }

  std::span<const double> component_smoothness() const { return constants_.component; }
  double smoothness(std::size_t i) const { return constants_.component[i]; }
  double L_f() const { return constants_.global; }
  double L_bar() const { return L_bar_; }
  double L_max() const { return L_max_; }
  double mu_f() const { return 0.0; }
  double mu_psi() const { return lambda2_; }
  double mu() const { return mu_f() + mu_psi(); }

  /// phi_i'(a_i^T x).
  double derivative(std::size_t i, std::span<const double> x) const;
  double derivative_at_margin(std::size_t i, double margin) const {
    return loss::derivative(loss_, margin, labels_[i]);
  }

  double component_value(std::size_t i, std::span<const double> x) const;
  double f(std::span<const double> x) const;
  double psi(std::span<const double> x) const;
  double objective(std::span<const double> x) const { return f(x) + psi(x); }

  /// Same problem with examples reordered (rows and labels).
  CompositeProblem permuted(std::span<const std::size_t> order) const;

 private:
  DesignMatrix data_;
  std::vector<double> labels_;
  LossKind loss_;
  double lambda1_;
  double lambda2_;
  SmoothnessConstants constants_;
  double L_bar_ = 0.0;
  double L_max_ = 0.0;
};

/// grad f_i(x) with the sparsity pattern of row i.
SparseVector component_gradient(const CompositeProblem& problem, std::size_t i,
                                std::span<const double> x);

std::vector<double> full_gradient(const CompositeProblem& problem, std::span<const double> x);

/// Elastic-net proximal map for one coordinate:
/// sign(v) max(|v| - eta l1, 0) / (1 + eta l2).
inline double prox_coordinate(double v, double eta, double lambda1, double lambda2) {
  const double shrunk = v > eta * lambda1    ? v - eta * lambda1
                        : v < -eta * lambda1 ? v + eta * lambda1
                                             : 0.0;
  return shrunk / (1.0 + eta * lambda2);
}

/// prox_eta(v) = argmin_y { ||v - y||^2 / (2 eta) + psi(y) }. Throws on eta <= 0.
std::vector<double> prox_psi(const CompositeProblem& problem, double eta, std::span<const double> v);

/// Norm of the gradient mapping (x - prox_eta(x - eta grad f(x))) / eta.
double gradient_mapping_norm(const CompositeProblem& problem, std::span<const double> x, double eta);

/// Per-example derivatives at a reference point w and the aggregate
/// (1/n) sum_i phi_i'(a_i^T w) a_i.
class GradTable {
 public:
  GradTable() = default;
  GradTable(const CompositeProblem& problem, std::span<const double> w) { refresh(problem, w); }

  void refresh(const CompositeProblem& problem, std::span<const double> w);

  std::span<const double> derivatives() const { return derivatives_; }
  double derivative(std::size_t i) const { return derivatives_[i]; }
  std::span<const double> aggregate() const { return aggregate_; }

 private:
  std::vector<double> derivatives_;
  std::vector<double> aggregate_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm_sq(std::span<const double> a);
double distance_sq(std::span<const double> a, std::span<const double> b);

}  // namespace loopless
