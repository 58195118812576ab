#pragma once

#include <span>
#include <vector>

#include "loopless/problem.hpp"
#include "loopless/sampling.hpp"
#include "loopless/smoothness.hpp"
#include "loopless/solvers.hpp"

namespace loopless {

/// E_S || sum_{(i,m,theta) in S} (m theta / n)(grad f_i(x) - grad f_i(y)) ||^2.
double estimator_second_moment(const CompositeProblem& problem, std::span<const double> x,
                               std::span<const double> y, std::span<const Outcome> outcomes);

/// Same with the mean (1/n)(grad f(x) - grad f(y)) subtracted inside the norm.
double centered_second_moment(const CompositeProblem& problem, std::span<const double> x,
                              std::span<const double> y, std::span<const Outcome> outcomes);

/// D_f(x, y) = f(x) - f(y) - <grad f(y), x - y>.
double bregman(const CompositeProblem& problem, std::span<const double> x, std::span<const double> y);

/// sum_C P(C) g_C with g_C the estimator for batch C.
std::vector<double> expected_estimator(const CompositeProblem& problem, const GradTable& table,
                                       std::span<const double> x, std::span<const Outcome> outcomes);

enum class ProbeKind { StronglyConvex, Momentum, Convex, Nonconvex };

/// Iterates a probe looks at: (x, w) for L-SVRG, (z, y, w) for L-Katyusha.
struct ProbeState {
  std::vector<double> x;
  std::vector<double> w;
  std::vector<double> z;
  std::vector<double> y;
};

/// Lyapunov function of one rate theorem with its coefficients.
struct ContractionProbe {
  ProbeKind kind = ProbeKind::StronglyConvex;
  std::vector<double> x_star;
  double p_star = 0.0;

  LSvrgConfig lsvrg;
  LKatyushaConfig katyusha;

  double mu = 0.0;
  double mu_psi = 0.0;
  double L_f = 0.0;
  double L3 = 0.0;

  double distance_weight = 1.0;  // StronglyConvex: 1, Convex: 1/(2 eta)
  double variance_weight = 0.0;  // StronglyConvex: 4 eta^2 / (p (1 + eta mu_psi)), Convex: alpha
  double alpha = 0.0;            // Convex: 6 eta / (5p), Nonconvex: 3 eta^2 L_f L3 / p
  double beta = 0.0;             // Convex: 5 / (6 eta), Nonconvex: p / (3 eta)
  double q = 0.0;                // Momentum
  int katyusha_case = 0;         // 11, 12, 21 or 22
};

ContractionProbe strongly_convex_probe(const CompositeProblem& problem, const LSvrgConfig& config,
                            std::vector<double> x_star, double p_star);
ContractionProbe momentum_probe(const CompositeProblem& problem, const SmoothnessProfile& profile,
                            const LKatyushaConfig& config, std::vector<double> x_star, double p_star);
ContractionProbe convex_probe(const CompositeProblem& problem, const LSvrgConfig& config,
                            std::vector<double> x_star, double p_star);
ContractionProbe nonconvex_probe(const CompositeProblem& problem, const SmoothnessProfile& profile,
                            const LSvrgConfig& config);

/// Exact value, with expectations over S taken by enumeration.
double lyapunov_value(const ContractionProbe& probe, const CompositeProblem& problem,
                      const ProbeState& state, std::span<const Outcome> outcomes);

/// E_k of the Lyapunov value after one step, over batch outcomes and both coin
/// outcomes.
double expected_one_step(const ContractionProbe& probe, const CompositeProblem& problem,
                         const ProbeState& state, std::span<const Outcome> outcomes);

/// One theorem inequality lhs <= rhs at a state:
///   StronglyConvex  E Psi+ <= max(1 - eta mu/(1 + eta mu_psi), 1 - p/2) Psi
///   Momentum  E Psi+ <= Z/(1 + eta sigma) + (1 - theta1 - theta2 + theta2/q) Y + (1 - p(1 - q)) W
///   Convex  E[P(x+) - P*] + E Psi+ <= (3/5)(P(x) - P*) + Psi
///   Nonconvex  E Psi+ <= Psi - (eta/4) ||grad f(x)||^2
struct ProbeCheck {
  double lhs = 0.0;
  double rhs = 0.0;

  bool holds(double slack_scale = 1e-10) const;
};

ProbeCheck check_one_step(const ContractionProbe& probe, const CompositeProblem& problem,
                          const ProbeState& state, std::span<const Outcome> outcomes);

}  // namespace loopless
