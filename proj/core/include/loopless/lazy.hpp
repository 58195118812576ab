#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loopless/problem.hpp"
#include "loopless/solvers.hpp"

namespace loopless {

/// x after t1 - t0 steps of x <- prox(x - eta u) with the elastic-net prox.
/// Piecewise closed form, one exact step at every sign change. When
/// `crossings` is given it is incremented once per sign change handled.
/// Throws when lambda2 <= 0 or t1 < t0.
double delayed_update(std::int64_t t0, std::int64_t t1, double u, double x, double eta,
                      double lambda1, double lambda2, int* crossings = nullptr);

struct KatyushaCoordinate {
  double y;
  double z;
};

/// Per-coordinate constants of the lazy L-Katyusha recursion.
struct KatyushaLazyParams {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double eta = 0.0;
  double L = 0.0;
  double sigma1 = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  static KatyushaLazyParams from(const LKatyushaConfig& config, double lambda1, double lambda2);
  double theta3() const { return 1.0 - theta1 - theta2; }
};

/// (y, z) after t1 - t0 untouched L-Katyusha steps with constant gradient u
/// and fixed w. Needs sigma1 = 0 and lambda2 > 0.
KatyushaCoordinate delayed_update_katyusha_l1(std::int64_t t0, std::int64_t t1, double u, double y,
                                              double z, double w, const KatyushaLazyParams& params,
                                              int* crossings = nullptr);

/// Same for lambda1 = 0 through powers of the 2x2 affine map on (z, y).
/// Any sigma1 is allowed.
KatyushaCoordinate delayed_update_katyusha_l2only(std::int64_t t0, std::int64_t t1, double u, double y,
                                                  double z, double w, const KatyushaLazyParams& params);

/// sum_{l=0}^{s-1} r^l for r in [0, 1], accurate near r = 1.
double geometric_sum(double r, std::int64_t s);
/// sum_{l=1}^{s} a^l b^(s-l) for a, b in [0, 1].
double mixed_power_sum(double a, double b, std::int64_t s);

/// Work counters. `coordinate_work` counts per-coordinate materializations
/// and updates outside refreshes; `flush_work` counts those done by full
/// flushes; `batch_nnz` sums the support sizes of the sampled rows.
struct LazyStats {
  std::uint64_t coordinate_work = 0;
  std::uint64_t flush_work = 0;
  std::uint64_t batch_nnz = 0;
  int max_crossings = 0;
};

/// Per-coordinate bookkeeping: the iteration up to which each coordinate is
/// current. The drift of a stale coordinate is grad_table.aggregate[j].
struct LazyLedger {
  std::vector<std::int64_t> last_touched;
  std::vector<std::uint32_t> mark;  // stamp for deduplicating batch supports
  std::uint32_t stamp = 0;

  explicit LazyLedger(std::size_t d = 0) : last_touched(d, 0), mark(d, 0) {}
};

/// Union of the supports of the batch rows, each coordinate once.
std::vector<std::size_t> batch_support(const CompositeProblem& problem, const DrawnBatch& batch,
                                       LazyLedger& ledger);

/// Sparse L-SVRG: cost per iteration proportional to the batch support, plus a
/// full pass on each reference refresh. Needs lambda2 > 0.
class LazyLSvrg final : public Optimizer {
 public:
  LazyLSvrg(const CompositeProblem& problem, LSvrgConfig config, std::vector<double> x0);

  void step(const DrawnBatch& batch, bool refresh) override;
  std::vector<double> iterate() const override;
  std::size_t iteration() const override { return static_cast<std::size_t>(k_); }
  std::size_t refreshes() const override { return refreshes_; }
  double refresh_probability() const override { return config_.p; }
  std::string name() const override { return "lsvrg-lazy"; }

  /// Brings the given coordinates up to the current iteration.
  void materialize(std::span<const std::size_t> coords);
  void flush();

  const LazyLedger& ledger() const { return ledger_; }
  const LazyStats& stats() const { return stats_; }
  std::span<const double> raw_x() const { return x_; }
  std::span<const double> reference() const { return w_; }

 private:
  double advanced(std::size_t j) const;

  const CompositeProblem& problem_;
  LSvrgConfig config_;
  std::vector<double> x_;
  std::vector<double> w_;
  GradTable table_;
  LazyLedger ledger_;
  LazyStats stats_;
  std::int64_t k_ = 0;
  std::size_t refreshes_ = 0;
  std::vector<double> g_;
};

/// Sparse L-Katyusha. Uses the matrix-power path when lambda1 = 0 and the
/// piecewise path otherwise (which needs sigma1 = 0). Needs lambda2 > 0.
class LazyLKatyusha final : public Optimizer {
 public:
  LazyLKatyusha(const CompositeProblem& problem, LKatyushaConfig config, std::vector<double> x0);

  void step(const DrawnBatch& batch, bool refresh) override;
  std::vector<double> iterate() const override;
  std::size_t iteration() const override { return static_cast<std::size_t>(k_); }
  std::size_t refreshes() const override { return refreshes_; }
  double refresh_probability() const override { return config_.p; }
  std::string name() const override { return "lkatyusha-lazy"; }

  void materialize(std::span<const std::size_t> coords);
  void flush();

  /// Fully materialized (z, y).
  std::pair<std::vector<double>, std::vector<double>> iterates() const;

  const LazyLedger& ledger() const { return ledger_; }
  const LazyStats& stats() const { return stats_; }

 private:
  KatyushaCoordinate advanced(std::size_t j) const;

  const CompositeProblem& problem_;
  LKatyushaConfig config_;
  KatyushaLazyParams params_;
  std::vector<double> z_;
  std::vector<double> y_;
  std::vector<double> w_;
  GradTable table_;
  LazyLedger ledger_;
  LazyStats stats_;
  std::int64_t k_ = 0;
  std::size_t refreshes_ = 0;
  std::vector<double> g_;
  std::vector<double> x_;
};

}  // namespace loopless
