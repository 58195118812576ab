#include "loopless/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace loopless {

namespace {

// sum over batch entries of (m theta / n)(grad f_i(x) - grad f_i(y)), dense.
std::vector<double> batch_difference(const CompositeProblem& problem, std::span<const double> dx,
                                     std::span<const double> dy, const DrawnBatch& batch) {
  std::vector<double> out(problem.d(), 0.0);
  const double nd = static_cast<double>(problem.n());
  for (const auto& e : batch.entries) {
    const double c = static_cast<double>(e.multiplicity) * e.weight / nd * (dx[e.index] - dy[e.index]);
    for (const auto& a : problem.data().row(e.index)) out[a.index] += c * a.value;
  }
  return out;
}

std::vector<double> derivatives_at(const CompositeProblem& problem, std::span<const double> x) {
  std::vector<double> out(problem.n());
  for (std::size_t i = 0; i < problem.n(); ++i) out[i] = problem.derivative(i, x);
  return out;
}

}  // namespace

double estimator_second_moment(const CompositeProblem& problem, std::span<const double> x,
                               std::span<const double> y, std::span<const Outcome> outcomes) {
  const auto dx = derivatives_at(problem, x);
  const auto dy = derivatives_at(problem, y);
  double total = 0.0;
  for (const auto& o : outcomes) total += o.probability * norm_sq(batch_difference(problem, dx, dy, o.batch));
  return total;
}

double centered_second_moment(const CompositeProblem& problem, std::span<const double> x,
                              std::span<const double> y, std::span<const Outcome> outcomes) {
  const auto dx = derivatives_at(problem, x);
  const auto dy = derivatives_at(problem, y);
  const auto gx = full_gradient(problem, x);
  const auto gy = full_gradient(problem, y);
  double total = 0.0;
  for (const auto& o : outcomes) {
    auto v = batch_difference(problem, dx, dy, o.batch);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= gx[j] - gy[j];
    total += o.probability * norm_sq(v);
  }
  return total;
}

double bregman(const CompositeProblem& problem, std::span<const double> x, std::span<const double> y) {
  const auto gy = full_gradient(problem, y);
  double inner = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) inner += gy[j] * (x[j] - y[j]);
  return problem.f(x) - problem.f(y) - inner;
}

std::vector<double> expected_estimator(const CompositeProblem& problem, const GradTable& table,
                                       std::span<const double> x, std::span<const Outcome> outcomes) {
  std::vector<double> mean(problem.d(), 0.0);
  for (const auto& o : outcomes) {
    const auto g = estimator(problem, table, x, o.batch);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += o.probability * g[j];
  }
  return mean;
}

namespace {

ContractionProbe base_probe(ProbeKind kind, const CompositeProblem& problem, std::vector<double> x_star,
                            double p_star) {
  if (!x_star.empty() && x_star.size() != problem.d()) {
    throw std::invalid_argument("reference point has the wrong length");
  }
  ContractionProbe probe;
  probe.kind = kind;
  probe.x_star = std::move(x_star);
  probe.p_star = p_star;
  probe.mu = problem.mu();
  probe.mu_psi = problem.mu_psi();
  probe.L_f = problem.L_f();
  return probe;
}

}  // namespace

ContractionProbe strongly_convex_probe(const CompositeProblem& problem, const LSvrgConfig& config,
                            std::vector<double> x_star, double p_star) {
  auto probe = base_probe(ProbeKind::StronglyConvex, problem, std::move(x_star), p_star);
  probe.lsvrg = config;
  const double eta = config.eta;
  probe.distance_weight = 1.0;
  probe.variance_weight = 4.0 * eta * eta / (config.p * (1.0 + eta * probe.mu_psi));
  return probe;
}

ContractionProbe momentum_probe(const CompositeProblem& problem, const SmoothnessProfile& profile,
                            const LKatyushaConfig& config, std::vector<double> x_star, double p_star) {
  auto probe = base_probe(ProbeKind::Momentum, problem, std::move(x_star), p_star);
  probe.katyusha = config;
  const double mu = probe.mu;
  const double p = config.p;
  const double L2 = profile.L2;
  if (L2 > 0.0 && probe.L_f <= L2 / p) {
    const double r = std::sqrt(mu / (L2 * p));
    probe.katyusha_case = r >= 1.0 ? 11 : 12;
    probe.q = r >= 1.0 ? 2.0 / 3.0 : 1.0 - r / 3.0;
  } else {
    const double r = std::sqrt(mu / probe.L_f);
    probe.katyusha_case = r >= p / 2.0 ? 21 : 22;
    probe.q = r >= p / 2.0 ? 2.0 / 3.0 : 1.0 - 2.0 / (3.0 * p) * r;
  }
  return probe;
}

ContractionProbe convex_probe(const CompositeProblem& problem, const LSvrgConfig& config,
                            std::vector<double> x_star, double p_star) {
  auto probe = base_probe(ProbeKind::Convex, problem, std::move(x_star), p_star);
  probe.lsvrg = config;
  const double eta = config.eta;
  probe.alpha = 6.0 * eta / (5.0 * config.p);
  probe.beta = 5.0 / (6.0 * eta);
  probe.distance_weight = 1.0 / (2.0 * eta);
  probe.variance_weight = probe.alpha;
  return probe;
}

ContractionProbe nonconvex_probe(const CompositeProblem& problem, const SmoothnessProfile& profile,
                            const LSvrgConfig& config) {
  auto probe = base_probe(ProbeKind::Nonconvex, problem, {}, 0.0);
  probe.lsvrg = config;
  probe.L3 = profile.L3;
  const double eta = config.eta;
  probe.alpha = 3.0 * eta * eta * probe.L_f * probe.L3 / config.p;
  probe.beta = config.p / (3.0 * eta);
  return probe;
}

namespace {

void require_reference(const ContractionProbe& probe, const CompositeProblem& problem) {
  if (probe.x_star.size() != problem.d()) throw std::invalid_argument("probe needs a reference optimum");
}

double sigma_of(const ContractionProbe& probe) { return probe.mu / probe.katyusha.L; }

double momentum_parts(const ContractionProbe& probe, const CompositeProblem& problem, const ProbeState& s,
                  double* Z, double* Y, double* W) {
  const auto& c = probe.katyusha;
  const double sigma = sigma_of(probe);
  *Z = c.L * (1.0 + c.eta * sigma) / (2.0 * c.eta) * distance_sq(s.z, probe.x_star);
  *Y = (problem.objective(s.y) - probe.p_star) / c.theta1;
  *W = c.theta2 / (c.p * probe.q * c.theta1) * (problem.objective(s.w) - probe.p_star);
  return *Z + *Y + *W;
}

}  // namespace

double lyapunov_value(const ContractionProbe& probe, const CompositeProblem& problem,
                      const ProbeState& state, std::span<const Outcome> outcomes) {
  switch (probe.kind) {
    case ProbeKind::StronglyConvex:
    case ProbeKind::Convex:
      require_reference(probe, problem);
      return probe.distance_weight * distance_sq(state.x, probe.x_star) +
             probe.variance_weight * estimator_second_moment(problem, state.w, probe.x_star, outcomes);
    case ProbeKind::Momentum: {
      require_reference(probe, problem);
      double Z, Y, W;
      return momentum_parts(probe, problem, state, &Z, &Y, &W);
    }
    case ProbeKind::Nonconvex:
      return problem.f(state.x) + probe.alpha * distance_sq(state.x, state.w);
  }
  throw std::invalid_argument("unknown probe kind");
}

namespace {

// Applies f(next_state, probability) to every (batch, coin) outcome.
template <typename Visit>
void for_each_successor(const ContractionProbe& probe, const CompositeProblem& problem,
                        const ProbeState& state, std::span<const Outcome> outcomes, Visit&& visit) {
  if (probe.kind == ProbeKind::Momentum) {
    const auto& c = probe.katyusha;
    LKatyushaState base;
    base.z = state.z;
    base.y = state.y;
    base.w = state.w;
    base.table.refresh(problem, base.w);
    for (const auto& o : outcomes) {
      for (bool coin : {false, true}) {
        const double weight = o.probability * (coin ? c.p : 1.0 - c.p);
        if (weight == 0.0) continue;
        LKatyushaState next = base;
        lkatyusha_step(problem, next, c, o.batch, coin);
        ProbeState out;
        out.z = std::move(next.z);
        out.y = std::move(next.y);
        out.w = std::move(next.w);
        visit(out, weight);
      }
    }
    return;
  }
  const auto& c = probe.lsvrg;
  LSvrgState base;
  base.x = state.x;
  base.w = state.w;
  base.table.refresh(problem, base.w);
  for (const auto& o : outcomes) {
    for (bool coin : {false, true}) {
      const double weight = o.probability * (coin ? c.p : 1.0 - c.p);
      if (weight == 0.0) continue;
      LSvrgState next = base;
      lsvrg_step(problem, next, c, o.batch, coin);
      ProbeState out;
      out.x = std::move(next.x);
      out.w = std::move(next.w);
      visit(out, weight);
    }
  }
}

}  // namespace

double expected_one_step(const ContractionProbe& probe, const CompositeProblem& problem,
                         const ProbeState& state, std::span<const Outcome> outcomes) {
  double total = 0.0;
  for_each_successor(probe, problem, state, outcomes, [&](const ProbeState& next, double weight) {
    total += weight * lyapunov_value(probe, problem, next, outcomes);
  });
  return total;
}

bool ProbeCheck::holds(double slack_scale) const {
  return lhs <= rhs + slack_scale * (1.0 + std::max(std::abs(lhs), std::abs(rhs)));
}

ProbeCheck check_one_step(const ContractionProbe& probe, const CompositeProblem& problem,
                          const ProbeState& state, std::span<const Outcome> outcomes) {
  ProbeCheck out;
  const double current = lyapunov_value(probe, problem, state, outcomes);
  switch (probe.kind) {
    case ProbeKind::StronglyConvex: {
      const double eta = probe.lsvrg.eta;
      const double rate = std::max(1.0 - eta * probe.mu / (1.0 + eta * probe.mu_psi), 1.0 - probe.lsvrg.p / 2.0);
      out.lhs = expected_one_step(probe, problem, state, outcomes);
      out.rhs = rate * current;
      break;
    }
    case ProbeKind::Momentum: {
      const auto& c = probe.katyusha;
      double Z, Y, W;
      momentum_parts(probe, problem, state, &Z, &Y, &W);
      out.lhs = expected_one_step(probe, problem, state, outcomes);
      out.rhs = Z / (1.0 + c.eta * sigma_of(probe)) + (1.0 - (c.theta1 + c.theta2 - c.theta2 / probe.q)) * Y +
                (1.0 - c.p * (1.0 - probe.q)) * W;
      break;
    }
    case ProbeKind::Convex: {
      double next_gap = 0.0;
      double next_psi = 0.0;
      for_each_successor(probe, problem, state, outcomes, [&](const ProbeState& next, double weight) {
        next_gap += weight * (problem.objective(next.x) - probe.p_star);
        next_psi += weight * lyapunov_value(probe, problem, next, outcomes);
      });
      out.lhs = next_gap + next_psi;
      out.rhs = 0.6 * (problem.objective(state.x) - probe.p_star) + current;
      break;
    }
    case ProbeKind::Nonconvex: {
      const double g = norm_sq(full_gradient(problem, state.x));
      out.lhs = expected_one_step(probe, problem, state, outcomes);
      out.rhs = current - probe.lsvrg.eta / 4.0 * g;
      break;
    }
  }
  return out;
}

}  // namespace loopless
