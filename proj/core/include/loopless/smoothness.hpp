#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "loopless/sampling.hpp"

namespace loopless {

class CompositeProblem;

/// Expected-smoothness bounds attached to a (problem, sampler) pair.
///
/// L1 bounds E||(1/n)(G(x) - G(y)) theta_S I_S e||^2 by 2 L1 D_f(x, y);
/// L2 bounds the centered version of the same quantity by 2 L2 D_f(x, y);
/// L3 bounds the centered version by L3 ||x - y||^2.
struct SmoothnessProfile {
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
  std::string source;
  std::vector<double> beta;  // filled by bounds_beta
  std::vector<double> v;     // filled by bounds_eso
};

SmoothnessProfile bounds_tau_nice(std::span<const double> L, double L_f, std::size_t tau);

/// Group (or independent) sampling with theta_i = 1/p_i. Singleton groups are
/// the isolated indices.
SmoothnessProfile bounds_group(std::span<const double> L, double L_f, const SamplerSpec& spec);

SmoothnessProfile bounds_with_replacement(std::span<const double> L, double L_f, std::size_t tau,
                                          std::span<const double> distribution);

/// beta_i = sum_C p_C |C| m_i (theta_C^i)^2 by exhaustive enumeration, |C|
/// counted with multiplicity.
SmoothnessProfile bounds_beta(std::span<const double> L, const SamplerSpec& spec);
SmoothnessProfile bounds_beta(std::span<const double> L, std::span<const Outcome> outcomes);

/// ESO route with caller-supplied v_i: E||sum_{i in S} a_i h_i||^2 <= sum p_i v_i h_i^2.
SmoothnessProfile bounds_eso(std::span<const double> v, std::span<const double> p, double gamma,
                             std::span<const double> row_norms_sq);

struct ImportanceMarginals {
  std::vector<double> group;        // p_i for group sampling, sum = tau
  std::vector<double> replacement;  // p~_i = L_i / sum L
};

/// Capped proportional allocation of the inclusion budget tau. Indices with
/// q_i = L_i tau / sum(L) > 1 are pinned at 1 and the rest of the budget is
/// re-spread proportionally until nothing exceeds 1. With `practical` set,
/// p_i = min(q_i, 1) instead and sum(p) may fall below tau.
/// All-zero L falls back to uniform marginals.
ImportanceMarginals importance_marginals(std::span<const double> L, double tau, bool practical = false);

/// Bounds for the scheme of `spec`.
SmoothnessProfile profile_for(const CompositeProblem& problem, const SamplerSpec& spec);

}  // namespace loopless
