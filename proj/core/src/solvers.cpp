#include "loopless/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace loopless {

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::StronglyConvex:
      return "strongly-convex";
    case Regime::Convex:
      return "convex";
    case Regime::Nonconvex:
      return "nonconvex";
  }
  return "unknown";
}

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::LSvrg:
      return "lsvrg";
    case Algorithm::LKatyusha:
      return "lkatyusha";
  }
  return "unknown";
}

const char* to_string(KatyushaRefresh refresh) {
  switch (refresh) {
    case KatyushaRefresh::CoupledPoint:
      return "coupled";
    case KatyushaRefresh::PreviousY:
      return "previous-y";
  }
  return "unknown";
}

namespace {
void check_probability(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("reference-update probability p must lie in (0, 1], got " +
                                std::to_string(p));
  }
}
}  // namespace

LSvrgConfig lsvrg_schedule(const SmoothnessProfile& profile, const CompositeProblem& problem,
                           Regime regime, double p) {
  check_probability(p);
  LSvrgConfig out;
  out.p = p;
  out.regime = regime;
  const double L_f = problem.L_f();
  switch (regime) {
    case Regime::StronglyConvex:
      if (!(profile.L1 > 0.0)) throw std::invalid_argument("step schedule needs L1 > 0");
      out.eta = 1.0 / (6.0 * profile.L1);
      break;
    case Regime::Convex:
      if (!(profile.L1 > 0.0)) throw std::invalid_argument("step schedule needs L1 > 0");
      out.eta = 1.0 / (8.0 * profile.L1);
      if (L_f > profile.L1) out.eta = std::min(out.eta, 1.0 / (6.0 * L_f));
      break;
    case Regime::Nonconvex: {
      if (!(L_f > 0.0)) throw std::invalid_argument("step schedule needs L_f > 0");
      if (profile.L3 < 0.0) throw std::invalid_argument("step schedule needs L3 >= 0");
      out.eta = 1.0 / (4.0 * L_f);
      // L3 = 0 (full batch) makes both variance terms vacuous.
      if (profile.L3 > 0.0) {
        out.eta = std::min(out.eta, std::pow(p, 2.0 / 3.0) / std::cbrt(36.0 * L_f * profile.L3));
        out.eta = std::min(out.eta, std::sqrt(p / (6.0 * profile.L3)));
      }
      break;
    }
  }
  return out;
}

LKatyushaConfig lkatyusha_schedule(const SmoothnessProfile& profile, const CompositeProblem& problem,
                                   double p) {
  check_probability(p);
  const double mu = problem.mu();
  if (!(mu > 0.0)) {
    throw std::invalid_argument("loopless Katyusha needs mu > 0 (set lambda2 > 0)");
  }
  const double L_f = problem.L_f();
  const double L2 = profile.L2;
  if (!(L_f > 0.0)) throw std::invalid_argument("momentum schedule needs L_f > 0");
  if (L2 < 0.0) throw std::invalid_argument("momentum schedule needs L2 >= 0");
  LKatyushaConfig out;
  out.p = p;
  out.L = std::max(L2, L_f);
  out.theta2 = L2 / (2.0 * out.L);
  if (L2 > 0.0 && L_f <= L2 / p) {
    out.theta1 = std::min(std::sqrt(mu / (L2 * p)) * out.theta2, out.theta2);
  } else {
    out.theta1 = std::min(std::sqrt(mu / L_f), p / 2.0);
  }
  out.eta = 1.0 / (3.0 * out.theta1);
  out.sigma1 = problem.mu_f() / out.L;
  out.sigma2 = problem.mu_psi() / out.L;
  return out;
}

std::vector<double> batch_coefficients(const CompositeProblem& problem, const GradTable& table,
                                       std::span<const double> x, const DrawnBatch& batch) {
  const double nd = static_cast<double>(problem.n());
  std::vector<double> c;
  c.reserve(batch.entries.size());
  for (const auto& e : batch.entries) {
    const double dx = problem.derivative(e.index, x);
    c.push_back(static_cast<double>(e.multiplicity) * e.weight / nd * (dx - table.derivative(e.index)));
  }
  return c;
}

std::vector<double> estimator(const CompositeProblem& problem, const GradTable& table,
                              std::span<const double> x, const DrawnBatch& batch) {
  std::vector<double> g(table.aggregate().begin(), table.aggregate().end());
  const auto c = batch_coefficients(problem, table, x, batch);
  for (std::size_t k = 0; k < batch.entries.size(); ++k) {
    for (const auto& a : problem.data().row(batch.entries[k].index)) g[a.index] += c[k] * a.value;
  }
  return g;
}

namespace {
void check_start(const CompositeProblem& problem, const std::vector<double>& x0) {
  if (x0.size() != problem.d()) {
    throw std::invalid_argument("starting point has length " + std::to_string(x0.size()) +
                                ", expected " + std::to_string(problem.d()));
  }
}
}  // namespace

LSvrgState::LSvrgState(const CompositeProblem& problem, std::vector<double> x0)
    : x(std::move(x0)) {
  check_start(problem, x);
  w = x;
  table.refresh(problem, w);
}

LKatyushaState::LKatyushaState(const CompositeProblem& problem, std::vector<double> x0)
    : z(std::move(x0)) {
  check_start(problem, z);
  y = z;
  w = z;
  table.refresh(problem, w);
}

std::vector<double> LKatyushaState::coupled_point(const LKatyushaConfig& config) const {
  std::vector<double> x(z.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = katyusha_point(z[j], w[j], y[j], config);
  return x;
}

void lsvrg_step(const CompositeProblem& problem, LSvrgState& state, const LSvrgConfig& config,
                const DrawnBatch& batch, bool refresh) {
  const auto g = estimator(problem, state.table, state.x, batch);
  std::vector<double> previous;
  if (refresh) previous = state.x;
  for (std::size_t j = 0; j < state.x.size(); ++j) {
    state.x[j] = lsvrg_coordinate_step(state.x[j], g[j], config.eta, problem.lambda1(), problem.lambda2());
  }
  if (refresh) {
    state.w = std::move(previous);
    state.table.refresh(problem, state.w);
    ++state.refreshes;
  }
  ++state.k;
}

void lsvrg_step(const CompositeProblem& problem, LSvrgState& state, const LSvrgConfig& config,
                const DrawnBatch& batch, Rng& rng) {
  lsvrg_step(problem, state, config, batch, bernoulli(rng, config.p));
}

void lkatyusha_step(const CompositeProblem& problem, LKatyushaState& state,
                    const LKatyushaConfig& config, const DrawnBatch& batch, bool refresh) {
  auto x = state.coupled_point(config);
  std::vector<double> anchor;
  if (refresh && config.refresh == KatyushaRefresh::PreviousY) anchor = state.y;
  const auto g = estimator(problem, state.table, x, batch);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto [z_next, y_next] =
        katyusha_coordinate_step(x[j], state.z[j], g[j], config, problem.lambda1(), problem.lambda2());
    state.z[j] = z_next;
    state.y[j] = y_next;
  }
  if (refresh) {
    state.w = anchor.empty() ? std::move(x) : std::move(anchor);
    state.table.refresh(problem, state.w);
    ++state.refreshes;
  }
  ++state.k;
}

void lkatyusha_step(const CompositeProblem& problem, LKatyushaState& state,
                    const LKatyushaConfig& config, const DrawnBatch& batch, Rng& rng) {
  lkatyusha_step(problem, state, config, batch, bernoulli(rng, config.p));
}

DenseLSvrg::DenseLSvrg(const CompositeProblem& problem, LSvrgConfig config, std::vector<double> x0)
    : problem_(problem), config_(config), state_(problem, std::move(x0)) {
  check_probability(config_.p);
  if (!(config_.eta > 0.0)) throw std::invalid_argument("step size must be positive");
}

void DenseLSvrg::step(const DrawnBatch& batch, bool refresh) {
  lsvrg_step(problem_, state_, config_, batch, refresh);
}

DenseLKatyusha::DenseLKatyusha(const CompositeProblem& problem, LKatyushaConfig config,
                               std::vector<double> x0)
    : problem_(problem), config_(config), state_(problem, std::move(x0)) {
  check_probability(config_.p);
  if (!(config_.eta > 0.0 && config_.L > 0.0)) {
    throw std::invalid_argument("momentum schedule needs eta > 0 and L > 0");
  }
}

void DenseLKatyusha::step(const DrawnBatch& batch, bool refresh) {
  lkatyusha_step(problem_, state_, config_, batch, refresh);
}

void RunRecord::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : metadata) {
    if (k == key) {
      v = value;
      return;
    }
  }
  metadata.emplace_back(key, value);
}

const std::string* RunRecord::find(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return &v;
  }
  return nullptr;
}

RunRecord run(const CompositeProblem& problem, Optimizer& optimizer, Sampler& sampler, Rng& rng,
              const RunOptions& options) {
  if (options.record_every == 0) throw std::invalid_argument("record cadence must be positive");
  const double grad_step = options.grad_map_step > 0.0 ? options.grad_map_step : 1.0 / problem.L_f();
  const double per_iteration = sampler.spec().tau() / static_cast<double>(problem.n());
  const std::size_t start_refreshes = optimizer.refreshes();
  const auto started = std::chrono::steady_clock::now();

  RunRecord record;
  std::size_t k = 0;
  auto epoch = [&] {
    return 1.0 + static_cast<double>(k) * per_iteration +
           static_cast<double>(optimizer.refreshes() - start_refreshes);
  };
  auto capture = [&] {
    RecordRow row;
    row.iteration = optimizer.iteration();
    row.epoch = epoch();
    const auto x = optimizer.iterate();
    row.suboptimality = problem.objective(x) - options.reference_value;
    row.grad_map_norm = gradient_mapping_norm(problem, x, grad_step);
    row.refreshes = optimizer.refreshes();
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.rows.push_back(row);
    if (options.on_record) options.on_record(row);
    return row.suboptimality <= options.target_suboptimality;
  };

  if (capture()) return record;
  bool recorded_last = true;
  while (k < options.max_iterations && epoch() < options.max_epochs) {
    const DrawnBatch batch = sampler.draw(rng);
    const bool refresh = bernoulli(rng, optimizer.refresh_probability());
    optimizer.step(batch, refresh);
    ++k;
    recorded_last = false;
    if (k % options.record_every == 0) {
      recorded_last = true;
      if (capture()) return record;
    }
  }
  if (!recorded_last) capture();
  return record;
}

}  // namespace loopless
