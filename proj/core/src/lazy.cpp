#include "loopless/lazy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace loopless {

namespace {

void check_interval(std::int64_t t0, std::int64_t t1) {
  if (t1 < t0) {
    throw std::invalid_argument("delayed update needs t1 >= t0 (t0=" + std::to_string(t0) +
                                ", t1=" + std::to_string(t1) + ")");
  }
}

void check_ridge(double lambda2) {
  if (!(lambda2 > 0.0)) throw std::invalid_argument("delayed update needs lambda2 > 0");
}

// s steps of v <- (v + h) q - h starting from v, where q = exp(-rate):
// v_s = alpha v - (1 - alpha) h with alpha = q^s.
double geometric_segment(double v, double h, double rate, std::int64_t s) {
  const double decay = std::expm1(-static_cast<double>(s) * rate);  // alpha - 1
  return v + decay * (v + h);
}

}  // namespace

double geometric_sum(double r, std::int64_t s) {
  if (s <= 0) return 0.0;
  if (r == 1.0) return static_cast<double>(s);
  if (r == 0.0) return 1.0;
  return -std::expm1(static_cast<double>(s) * std::log1p(r - 1.0)) / (1.0 - r);
}

double mixed_power_sum(double a, double b, std::int64_t s) {
  if (s <= 0 || a == 0.0) return 0.0;
  const double top = std::max(a, b);
  const double ratio = std::min(a, b) / top;
  return a * std::pow(top, static_cast<double>(s - 1)) * geometric_sum(ratio, s);
}

double delayed_update(std::int64_t t0, std::int64_t t1, double u, double x, double eta,
                      double lambda1, double lambda2, int* crossings) {
  check_interval(t0, t1);
  check_ridge(lambda2);
  const double rate = std::log1p(eta * lambda2);
  double sign = 1.0;
  while (true) {
    if (t1 == t0) return sign * x;
    const std::int64_t s = t1 - t0;
    if (x == 0.0) {
      if (u < -lambda1) return sign * geometric_segment(0.0, (u + lambda1) / lambda2, rate, s);
      if (u > lambda1) return sign * geometric_segment(0.0, (u - lambda1) / lambda2, rate, s);
      return 0.0;
    }
    if (x < 0.0) {
      sign = -sign;
      x = -x;
      u = -u;
    }
    const double h = (u + lambda1) / lambda2;
    if (h <= 0.0) return sign * geometric_segment(x, h, rate, s);
    // Time at which the positive-region closed form reaches zero.
    const double cross = std::log1p(x / h) / rate;
    if (cross >= static_cast<double>(s)) return sign * geometric_segment(x, h, rate, s);
    const auto before = static_cast<std::int64_t>(std::floor(cross));
    const double at_cross = std::max(geometric_segment(x, h, rate, before), 0.0);
    x = prox_coordinate(at_cross - eta * u, eta, lambda1, lambda2);
    t0 += before + 1;
    if (crossings) ++*crossings;
  }
}

KatyushaLazyParams KatyushaLazyParams::from(const LKatyushaConfig& config, double lambda1,
                                            double lambda2) {
  KatyushaLazyParams out;
  out.theta1 = config.theta1;
  out.theta2 = config.theta2;
  out.eta = config.eta;
  out.L = config.L;
  out.sigma1 = config.sigma1;
  out.lambda1 = lambda1;
  out.lambda2 = lambda2;
  return out;
}

namespace {

// y after s steps of y <- theta1 z_l + theta2 w + theta3 y with
// z_l = q^l (z + h) - h, l = 1..s.
double katyusha_y_segment(double y, double z, double w, double h, double q, std::int64_t s,
                          const KatyushaLazyParams& p) {
  const double theta3 = p.theta3();
  const double carry = geometric_sum(theta3, s);
  return p.theta1 * (z + h) * mixed_power_sum(q, theta3, s) + (p.theta2 * w - p.theta1 * h) * carry +
         std::pow(theta3, static_cast<double>(s)) * y;
}

}  // namespace

KatyushaCoordinate delayed_update_katyusha_l1(std::int64_t t0, std::int64_t t1, double u, double y,
                                              double z, double w, const KatyushaLazyParams& params,
                                              int* crossings) {
  check_interval(t0, t1);
  check_ridge(params.lambda2);
  if (params.sigma1 != 0.0 && params.lambda1 > 0.0) {
    throw std::invalid_argument("lazy Katyusha with lambda1 > 0 needs sigma1 = 0");
  }
  const double step = params.eta / params.L;
  const double lambda1 = params.lambda1;
  const double lambda2 = params.lambda2;
  const double rate = std::log1p(step * lambda2);
  const double q = 1.0 / (1.0 + step * lambda2);
  const double theta3 = params.theta3();
  double sign = 1.0;
  while (true) {
    if (t1 == t0) return {sign * y, sign * z};
    const std::int64_t s = t1 - t0;
    if (z == 0.0) {
      double h = 0.0;
      double factor = 0.0;  // z stays at zero
      if (u < -lambda1) {
        h = (u + lambda1) / lambda2;
        factor = q;
      } else if (u > lambda1) {
        h = (u - lambda1) / lambda2;
        factor = q;
      }
      const double z_end = factor == 0.0 ? 0.0 : geometric_segment(0.0, h, rate, s);
      return {sign * katyusha_y_segment(y, 0.0, w, h, factor, s, params), sign * z_end};
    }
    if (z < 0.0) {
      sign = -sign;
      z = -z;
      y = -y;
      w = -w;
      u = -u;
    }
    const double h = (u + lambda1) / lambda2;
    double cross = static_cast<double>(s);
    if (h > 0.0) cross = std::log1p(z / h) / rate;
    if (cross >= static_cast<double>(s)) {
      return {sign * katyusha_y_segment(y, z, w, h, q, s, params),
              sign * geometric_segment(z, h, rate, s)};
    }
    const auto before = static_cast<std::int64_t>(std::floor(cross));
    const double z_cross = std::max(geometric_segment(z, h, rate, before), 0.0);
    const double y_cross = katyusha_y_segment(y, z, w, h, q, before, params);
    z = prox_coordinate(z_cross - step * u, step, lambda1, lambda2);
    y = params.theta1 * z + params.theta2 * w + theta3 * y_cross;
    t0 += before + 1;
    if (crossings) ++*crossings;
  }
}

namespace {

struct Mat2 {
  double a11, a12, a21, a22;
};

Mat2 operator*(const Mat2& a, const Mat2& b) {
  return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
          a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

Mat2 operator+(const Mat2& a, const Mat2& b) {
  return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}

// (A^m, sum_{s<m} A^s) pairs compose as (P, S) o (P', S') = (P P', S + P S').
struct PowerSum {
  Mat2 power;
  Mat2 sum;
};

PowerSum compose(const PowerSum& a, const PowerSum& b) {
  return {a.power * b.power, a.sum + a.power * b.sum};
}

PowerSum power_and_sum(const Mat2& A, std::int64_t m) {
  const Mat2 identity{1.0, 0.0, 0.0, 1.0};
  PowerSum result{identity, {0.0, 0.0, 0.0, 0.0}};
  PowerSum base{A, identity};
  while (m > 0) {
    if (m & 1) result = compose(result, base);
    base = compose(base, base);
    m >>= 1;
  }
  return result;
}

}  // namespace

KatyushaCoordinate delayed_update_katyusha_l2only(std::int64_t t0, std::int64_t t1, double u, double y,
                                                  double z, double w, const KatyushaLazyParams& params) {
  check_interval(t0, t1);
  if (params.lambda1 != 0.0) throw std::invalid_argument("matrix-power path needs lambda1 = 0");
  if (t1 == t0) return {y, z};
  const double eta = params.eta;
  const double L = params.L;
  const double es = eta * params.sigma1;
  const double theta1 = params.theta1;
  const double theta2 = params.theta2;
  const double theta3 = params.theta3();
  const double D = eta * params.lambda2 + L * (1.0 + es);
  if (!(D > 0.0)) throw std::invalid_argument("matrix-power path needs a positive denominator");
  Mat2 A;
  A.a11 = (es * theta1 + 1.0) * L / D;
  A.a12 = es * theta3 * L / D;
  A.a21 = theta1 * A.a11;
  A.a22 = theta3 + theta1 * A.a12;
  const double b1 = (es * theta2 * L * w - eta * u) / D;
  const double b2 = theta1 * b1 + theta2 * w;
  const auto [P, S] = power_and_sum(A, t1 - t0);
  const double z_next = P.a11 * z + P.a12 * y + S.a11 * b1 + S.a12 * b2;
  const double y_next = P.a21 * z + P.a22 * y + S.a21 * b1 + S.a22 * b2;
  return {y_next, z_next};
}

std::vector<std::size_t> batch_support(const CompositeProblem& problem, const DrawnBatch& batch,
                                       LazyLedger& ledger) {
  if (++ledger.stamp == 0) {
    std::fill(ledger.mark.begin(), ledger.mark.end(), 0u);
    ledger.stamp = 1;
  }
  std::vector<std::size_t> support;
  for (const auto& e : batch.entries) {
    for (const auto& a : problem.data().row(e.index)) {
      if (ledger.mark[a.index] != ledger.stamp) {
        ledger.mark[a.index] = ledger.stamp;
        support.push_back(a.index);
      }
    }
  }
  return support;
}

namespace {

std::uint64_t batch_nonzeros(const CompositeProblem& problem, const DrawnBatch& batch) {
  std::uint64_t nnz = 0;
  for (const auto& e : batch.entries) nnz += problem.data().row(e.index).size();
  return nnz;
}

// g_j on the support: aggregate plus batch corrections, accumulated in the
// same order as the dense estimator.
void support_gradient(const CompositeProblem& problem, const GradTable& table, const DrawnBatch& batch,
                      std::span<const double> coefficients, std::span<const std::size_t> support,
                      std::vector<double>& g) {
  const auto aggregate = table.aggregate();
  for (std::size_t j : support) g[j] = aggregate[j];
  for (std::size_t k = 0; k < batch.entries.size(); ++k) {
    for (const auto& a : problem.data().row(batch.entries[k].index)) g[a.index] += coefficients[k] * a.value;
  }
}

}  // namespace

LazyLSvrg::LazyLSvrg(const CompositeProblem& problem, LSvrgConfig config, std::vector<double> x0)
    : problem_(problem), config_(config), x_(std::move(x0)), ledger_(problem.d()), g_(problem.d(), 0.0) {
  if (x_.size() != problem.d()) throw std::invalid_argument("starting point has the wrong length");
  if (!(problem.lambda2() > 0.0)) throw std::invalid_argument("lazy updates need lambda2 > 0");
  if (!(config_.eta > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(config_.p > 0.0 && config_.p <= 1.0)) throw std::invalid_argument("p must lie in (0, 1]");
  w_ = x_;
  table_.refresh(problem_, w_);
}

double LazyLSvrg::advanced(std::size_t j) const {
  return delayed_update(ledger_.last_touched[j], k_, table_.aggregate()[j], x_[j], config_.eta,
                        problem_.lambda1(), problem_.lambda2());
}

void LazyLSvrg::materialize(std::span<const std::size_t> coords) {
  for (std::size_t j : coords) {
    if (ledger_.last_touched[j] == k_) continue;
    int crossings = 0;
    x_[j] = delayed_update(ledger_.last_touched[j], k_, table_.aggregate()[j], x_[j], config_.eta,
                           problem_.lambda1(), problem_.lambda2(), &crossings);
    stats_.max_crossings = std::max(stats_.max_crossings, crossings);
    ledger_.last_touched[j] = k_;
  }
}

void LazyLSvrg::flush() {
  for (std::size_t j = 0; j < x_.size(); ++j) {
    if (ledger_.last_touched[j] == k_) continue;
    x_[j] = advanced(j);
    ledger_.last_touched[j] = k_;
  }
}

std::vector<double> LazyLSvrg::iterate() const {
  std::vector<double> out(x_.size());
  for (std::size_t j = 0; j < x_.size(); ++j) out[j] = advanced(j);
  return out;
}

void LazyLSvrg::step(const DrawnBatch& batch, bool refresh) {
  const double eta = config_.eta;
  const double l1 = problem_.lambda1();
  const double l2 = problem_.lambda2();
  stats_.batch_nnz += batch_nonzeros(problem_, batch);
  if (refresh) {
    flush();
    stats_.flush_work += 2 * x_.size();
    std::vector<double> previous = x_;
    const auto g = estimator(problem_, table_, x_, batch);
    for (std::size_t j = 0; j < x_.size(); ++j) x_[j] = lsvrg_coordinate_step(x_[j], g[j], eta, l1, l2);
    w_ = std::move(previous);
    table_.refresh(problem_, w_);
    ++refreshes_;
    ++k_;
    std::fill(ledger_.last_touched.begin(), ledger_.last_touched.end(), k_);
    return;
  }
  const auto support = batch_support(problem_, batch, ledger_);
  materialize(support);
  const auto c = batch_coefficients(problem_, table_, x_, batch);
  support_gradient(problem_, table_, batch, c, support, g_);
  for (std::size_t j : support) {
    x_[j] = lsvrg_coordinate_step(x_[j], g_[j], eta, l1, l2);
    ledger_.last_touched[j] = k_ + 1;
  }
  stats_.coordinate_work += 2 * support.size();
  ++k_;
}

LazyLKatyusha::LazyLKatyusha(const CompositeProblem& problem, LKatyushaConfig config,
                             std::vector<double> x0)
    : problem_(problem),
      config_(config),
      params_(KatyushaLazyParams::from(config, problem.lambda1(), problem.lambda2())),
      z_(std::move(x0)),
      ledger_(problem.d()),
      g_(problem.d(), 0.0),
      x_(problem.d(), 0.0) {
  if (z_.size() != problem.d()) throw std::invalid_argument("starting point has the wrong length");
  if (!(problem.lambda2() > 0.0)) throw std::invalid_argument("lazy updates need lambda2 > 0");
  if (problem.lambda1() > 0.0 && config_.sigma1 != 0.0) {
    throw std::invalid_argument("lazy Katyusha with lambda1 > 0 needs sigma1 = 0");
  }
  if (!(config_.eta > 0.0 && config_.L > 0.0)) {
    throw std::invalid_argument("momentum schedule needs eta > 0 and L > 0");
  }
  y_ = z_;
  w_ = z_;
  table_.refresh(problem_, w_);
}

KatyushaCoordinate LazyLKatyusha::advanced(std::size_t j) const {
  const auto t0 = ledger_.last_touched[j];
  const double u = table_.aggregate()[j];
  if (problem_.lambda1() == 0.0) {
    return delayed_update_katyusha_l2only(t0, k_, u, y_[j], z_[j], w_[j], params_);
  }
  return delayed_update_katyusha_l1(t0, k_, u, y_[j], z_[j], w_[j], params_);
}

void LazyLKatyusha::materialize(std::span<const std::size_t> coords) {
  for (std::size_t j : coords) {
    if (ledger_.last_touched[j] == k_) continue;
    const auto next = advanced(j);
    y_[j] = next.y;
    z_[j] = next.z;
    ledger_.last_touched[j] = k_;
  }
}

void LazyLKatyusha::flush() {
  for (std::size_t j = 0; j < z_.size(); ++j) {
    if (ledger_.last_touched[j] == k_) continue;
    const auto next = advanced(j);
    y_[j] = next.y;
    z_[j] = next.z;
    ledger_.last_touched[j] = k_;
  }
}

std::pair<std::vector<double>, std::vector<double>> LazyLKatyusha::iterates() const {
  std::vector<double> z(z_.size());
  std::vector<double> y(y_.size());
  for (std::size_t j = 0; j < z_.size(); ++j) {
    const auto next = advanced(j);
    z[j] = next.z;
    y[j] = next.y;
  }
  return {std::move(z), std::move(y)};
}

std::vector<double> LazyLKatyusha::iterate() const { return iterates().second; }

void LazyLKatyusha::step(const DrawnBatch& batch, bool refresh) {
  const double l1 = problem_.lambda1();
  const double l2 = problem_.lambda2();
  stats_.batch_nnz += batch_nonzeros(problem_, batch);
  if (refresh) {
    flush();
    stats_.flush_work += 2 * z_.size();
    for (std::size_t j = 0; j < z_.size(); ++j) x_[j] = katyusha_point(z_[j], w_[j], y_[j], config_);
    std::vector<double> anchor = config_.refresh == KatyushaRefresh::PreviousY ? y_ : x_;
    const auto g = estimator(problem_, table_, x_, batch);
    for (std::size_t j = 0; j < z_.size(); ++j) {
      const auto [z_next, y_next] = katyusha_coordinate_step(x_[j], z_[j], g[j], config_, l1, l2);
      z_[j] = z_next;
      y_[j] = y_next;
    }
    w_ = std::move(anchor);
    table_.refresh(problem_, w_);
    ++refreshes_;
    ++k_;
    std::fill(ledger_.last_touched.begin(), ledger_.last_touched.end(), k_);
    return;
  }
  const auto support = batch_support(problem_, batch, ledger_);
  materialize(support);
  for (std::size_t j : support) x_[j] = katyusha_point(z_[j], w_[j], y_[j], config_);
  const auto c = batch_coefficients(problem_, table_, x_, batch);
  support_gradient(problem_, table_, batch, c, support, g_);
  for (std::size_t j : support) {
    const auto [z_next, y_next] = katyusha_coordinate_step(x_[j], z_[j], g_[j], config_, l1, l2);
    z_[j] = z_next;
    y_[j] = y_next;
    ledger_.last_touched[j] = k_ + 1;
  }
  stats_.coordinate_work += 2 * support.size();
  ++k_;
}

}  // namespace loopless
