#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loopless/problem.hpp"
#include "loopless/random.hpp"
#include "loopless/sampling.hpp"
#include "loopless/smoothness.hpp"

namespace loopless {

enum class Regime { StronglyConvex, Convex, Nonconvex };
enum class Algorithm { LSvrg, LKatyusha };

/// Point the reference w jumps to when the coin succeeds: the coupled point
/// x^k (default) or the previous y^k.
enum class KatyushaRefresh { CoupledPoint, PreviousY };

const char* to_string(Regime regime);
const char* to_string(Algorithm algorithm);
const char* to_string(KatyushaRefresh refresh);

struct LSvrgConfig {
  double eta = 0.0;
  double p = 1.0;  // reference-update probability
  Regime regime = Regime::StronglyConvex;
};

struct LKatyushaConfig {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double eta = 0.0;  // 1 / (3 theta1)
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double L = 0.0;  // max(L2, L_f)
  double p = 1.0;
  KatyushaRefresh refresh = KatyushaRefresh::CoupledPoint;

  double theta3() const { return 1.0 - theta1 - theta2; }
};

/// Step size from the rate theorem of the regime:
///   StronglyConvex  eta = 1/(6 L1)
///   Convex          eta = min(1/(8 L1), 1/(6 L_f))
///   Nonconvex       eta = min(1/(4 L_f), p^(2/3) / (36 L_f L3)^(1/3), sqrt(p / (6 L3)))
LSvrgConfig lsvrg_schedule(const SmoothnessProfile& profile, const CompositeProblem& problem,
                           Regime regime, double p);

/// Momentum weights of loopless Katyusha. Needs mu = mu_f + mu_psi > 0.
LKatyushaConfig lkatyusha_schedule(const SmoothnessProfile& profile, const CompositeProblem& problem,
                                   double p);

/// Per-coordinate updates shared by the dense and lazy paths so that both
/// round identically on the coordinates a batch touches.
inline double lsvrg_coordinate_step(double x, double g, double eta, double lambda1, double lambda2) {
  return prox_coordinate(x - eta * g, eta, lambda1, lambda2);
}

inline double katyusha_point(double z, double w, double y, const LKatyushaConfig& c) {
  return c.theta1 * z + c.theta2 * w + c.theta3() * y;
}

/// Returns (z+, y+) given the coupled point x = katyusha_point(z, w, y).
inline std::pair<double, double> katyusha_coordinate_step(double x, double z, double g,
                                                          const LKatyushaConfig& c,
                                                          double lambda1, double lambda2) {
  const double es = c.eta * c.sigma1;
  const double weight = c.eta / ((1.0 + es) * c.L);
  const double v = (es * x + z - (c.eta / c.L) * g) / (1.0 + es);
  const double z_next = prox_coordinate(v, weight, lambda1, lambda2);
  return {z_next, x + c.theta1 * (z_next - z)};
}

/// Scalar batch coefficients (m theta / n)(phi_i'(a_i^T x) - phi_i'(a_i^T w)),
/// one per batch entry, in entry order.
std::vector<double> batch_coefficients(const CompositeProblem& problem, const GradTable& table,
                                       std::span<const double> x, const DrawnBatch& batch);

/// g = (1/n)(G(x) - G(w)) theta_S I_S e + (1/n) G(w) e, with the table built at w.
std::vector<double> estimator(const CompositeProblem& problem, const GradTable& table,
                              std::span<const double> x, const DrawnBatch& batch);

struct LSvrgState {
  std::vector<double> x;
  std::vector<double> w;
  GradTable table;  // always built at w
  std::size_t k = 0;
  std::size_t refreshes = 0;

  LSvrgState() = default;
  LSvrgState(const CompositeProblem& problem, std::vector<double> x0);
};

struct LKatyushaState {
  std::vector<double> z;
  std::vector<double> y;
  std::vector<double> w;
  GradTable table;
  std::size_t k = 0;
  std::size_t refreshes = 0;

  LKatyushaState() = default;
  LKatyushaState(const CompositeProblem& problem, std::vector<double> x0);

  /// x^k = theta1 z + theta2 w + (1 - theta1 - theta2) y.
  std::vector<double> coupled_point(const LKatyushaConfig& config) const;
};

/// One iteration with an explicit coin outcome. On refresh, w takes the
/// pre-update iterate and the table is rebuilt.
void lsvrg_step(const CompositeProblem& problem, LSvrgState& state, const LSvrgConfig& config,
                const DrawnBatch& batch, bool refresh);
/// Draws the coin from rng after the update.
void lsvrg_step(const CompositeProblem& problem, LSvrgState& state, const LSvrgConfig& config,
                const DrawnBatch& batch, Rng& rng);

void lkatyusha_step(const CompositeProblem& problem, LKatyushaState& state,
                    const LKatyushaConfig& config, const DrawnBatch& batch, bool refresh);
void lkatyusha_step(const CompositeProblem& problem, LKatyushaState& state,
                    const LKatyushaConfig& config, const DrawnBatch& batch, Rng& rng);

/// Common driver surface for dense and lazy implementations.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  virtual void step(const DrawnBatch& batch, bool refresh) = 0;
  /// Reported point: x for L-SVRG, y for L-Katyusha. Fully materialized.
  virtual std::vector<double> iterate() const = 0;
  virtual std::size_t iteration() const = 0;
  virtual std::size_t refreshes() const = 0;
  virtual double refresh_probability() const = 0;
  virtual std::string name() const = 0;
};

class DenseLSvrg final : public Optimizer {
 public:
  DenseLSvrg(const CompositeProblem& problem, LSvrgConfig config, std::vector<double> x0);

  void step(const DrawnBatch& batch, bool refresh) override;
  std::vector<double> iterate() const override { return state_.x; }
  std::size_t iteration() const override { return state_.k; }
  std::size_t refreshes() const override { return state_.refreshes; }
  double refresh_probability() const override { return config_.p; }
  std::string name() const override { return "lsvrg"; }

  const LSvrgState& state() const { return state_; }

 private:
  const CompositeProblem& problem_;
  LSvrgConfig config_;
  LSvrgState state_;
};

class DenseLKatyusha final : public Optimizer {
 public:
  DenseLKatyusha(const CompositeProblem& problem, LKatyushaConfig config, std::vector<double> x0);

  void step(const DrawnBatch& batch, bool refresh) override;
  std::vector<double> iterate() const override { return state_.y; }
  std::size_t iteration() const override { return state_.k; }
  std::size_t refreshes() const override { return state_.refreshes; }
  double refresh_probability() const override { return config_.p; }
  std::string name() const override { return "lkatyusha"; }

  const LKatyushaState& state() const { return state_; }

 private:
  const CompositeProblem& problem_;
  LKatyushaConfig config_;
  LKatyushaState state_;
};

struct RecordRow {
  std::size_t iteration = 0;
  double epoch = 0.0;
  double wall_seconds = 0.0;
  double suboptimality = 0.0;
  double grad_map_norm = 0.0;
  std::size_t refreshes = 0;
};

struct RunRecord {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<RecordRow> rows;

  void set(const std::string& key, const std::string& value);
  const std::string* find(const std::string& key) const;
};

struct RunOptions {
  std::size_t max_iterations = std::numeric_limits<std::size_t>::max();
  double max_epochs = std::numeric_limits<double>::infinity();
  std::size_t record_every = 1;
  /// P-hat*, subtracted from P(iterate) in the suboptimality column.
  double reference_value = 0.0;
  /// Step of the gradient mapping; 0 means 1/L_f.
  double grad_map_step = 0.0;
  /// Stop as soon as a recorded row reaches this suboptimality.
  double target_suboptimality = -std::numeric_limits<double>::infinity();
  std::function<void(const RecordRow&)> on_record;
};

/// Drives an optimizer: per iteration one batch draw, then one coin flip, both
/// from `rng`. Epochs count the initial table build as one, then tau/n per
/// iteration and one per reference refresh.
RunRecord run(const CompositeProblem& problem, Optimizer& optimizer, Sampler& sampler, Rng& rng,
              const RunOptions& options);

}  // namespace loopless
