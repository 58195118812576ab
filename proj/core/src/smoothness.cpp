#include "loopless/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "loopless/problem.hpp"

namespace loopless {

namespace {
double max_of(std::span<const double> v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}
}  // namespace

SmoothnessProfile bounds_tau_nice(std::span<const double> L, double L_f, std::size_t tau) {
  const std::size_t n = L.size();
  if (tau < 1 || tau > n) {
    throw std::invalid_argument("tau-nice bounds need 1 <= tau <= n (tau=" + std::to_string(tau) +
                                ", n=" + std::to_string(n) + ")");
  }
  SmoothnessProfile out;
  out.source = "tau-nice";
  if (n == 1) {
    out.L1 = L_f;
    return out;
  }
  const double nd = static_cast<double>(n);
  const double td = static_cast<double>(tau);
  const double shared = nd * (td - 1.0) / (td * (nd - 1.0));
  const double spread = (nd - td) / (td * (nd - 1.0));
  double mean_sq = 0.0;
  for (double l : L) mean_sq += l * l;
  mean_sq /= nd;
  out.L1 = shared * L_f + spread * max_of(L);
  out.L2 = spread * max_of(L);
  out.L3 = spread * mean_sq;
  return out;
}

SmoothnessProfile bounds_group(std::span<const double> L, double L_f, const SamplerSpec& spec) {
  if (spec.scheme() != Scheme::Group && spec.scheme() != Scheme::Independent) {
    throw std::invalid_argument(std::string("group bounds need a group sampling, got ") +
                                to_string(spec.scheme()));
  }
  if (L.size() != spec.n()) throw std::invalid_argument("L has wrong length for sampler");
  const std::size_t n = L.size();
  double M = 0.0;
  double l3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = spec.probability(i);
    if (spec.isolated(i)) {
      M = std::max(M, (1.0 / p - 1.0) * L[i]);
      l3 += (1.0 / p - 1.0) * L[i] * L[i];
    } else {
      M = std::max(M, L[i] / p);
      l3 += L[i] * L[i] / p;
    }
  }
  const double nd = static_cast<double>(n);
  SmoothnessProfile out;
  out.source = "group";
  out.L1 = L_f + M / nd;
  out.L2 = M / nd;
  out.L3 = l3 / (nd * nd);
  return out;
}

SmoothnessProfile bounds_with_replacement(std::span<const double> L, double L_f, std::size_t tau,
                                          std::span<const double> distribution) {
  if (tau < 1) throw std::invalid_argument("sampling with replacement needs tau >= 1");
  if (L.size() != distribution.size()) throw std::invalid_argument("L has wrong length for sampler");
  double worst = 0.0;
  double l3 = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (!(distribution[i] > 0.0)) {
      throw std::invalid_argument("draw probability p~_" + std::to_string(i) + " must be positive");
    }
    worst = std::max(worst, L[i] / distribution[i]);
    l3 += L[i] * L[i] / distribution[i];
  }
  const double nd = static_cast<double>(L.size());
  const double td = static_cast<double>(tau);
  SmoothnessProfile out;
  out.source = "with-replacement";
  out.L2 = worst / (nd * td);
  out.L1 = (1.0 - 1.0 / td) * L_f + out.L2;
  out.L3 = l3 / (nd * nd * td);
  return out;
}

SmoothnessProfile bounds_beta(std::span<const double> L, std::span<const Outcome> outcomes) {
  std::vector<double> beta(L.size(), 0.0);
  for (const auto& o : outcomes) {
    const double size = static_cast<double>(o.batch.size());
    for (const auto& e : o.batch.entries) {
      if (e.index >= L.size()) throw std::invalid_argument("outcome index out of range");
      beta[e.index] += o.probability * size * static_cast<double>(e.multiplicity) * e.weight * e.weight;
    }
  }
  const double nd = static_cast<double>(L.size());
  SmoothnessProfile out;
  out.source = "beta";
  double worst = 0.0;
  double l3 = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    worst = std::max(worst, L[i] * beta[i]);
    l3 += beta[i] * L[i] * L[i];
  }
  out.L1 = worst / nd;
  out.L2 = out.L1;
  out.L3 = l3 / (nd * nd);
  out.beta = std::move(beta);
  return out;
}

SmoothnessProfile bounds_beta(std::span<const double> L, const SamplerSpec& spec) {
  if (L.size() != spec.n()) throw std::invalid_argument("L has wrong length for sampler");
  return bounds_beta(L, enumerate_outcomes(spec));
}

SmoothnessProfile bounds_eso(std::span<const double> v, std::span<const double> p, double gamma,
                             std::span<const double> row_norms_sq) {
  if (v.empty()) throw std::invalid_argument("ESO bounds need the parameters v_i");
  if (v.size() != p.size() || v.size() != row_norms_sq.size()) {
    throw std::invalid_argument("ESO parameters, marginals and row norms differ in length");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  double worst = 0.0;
  double l3 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0) throw std::invalid_argument("ESO parameter v_" + std::to_string(i) + " is negative");
    if (!(p[i] > 0.0 && p[i] <= 1.0)) {
      throw std::invalid_argument("marginal p_" + std::to_string(i) + " is outside (0, 1]");
    }
    worst = std::max(worst, v[i] / p[i]);
    l3 += v[i] * row_norms_sq[i] / p[i];
  }
  const double nd = static_cast<double>(v.size());
  SmoothnessProfile out;
  out.source = "eso";
  out.L1 = worst / (nd * gamma);
  out.L2 = out.L1;
  out.L3 = l3 / (nd * nd * gamma * gamma);
  out.v.assign(v.begin(), v.end());
  return out;
}

ImportanceMarginals importance_marginals(std::span<const double> L, double tau, bool practical) {
  const std::size_t n = L.size();
  if (n == 0) throw std::invalid_argument("importance marginals over an empty index set");
  if (!(tau >= 1.0 && tau <= static_cast<double>(n))) {
    throw std::invalid_argument("importance sampling needs 1 <= tau <= n");
  }
  ImportanceMarginals out;
  const double top = *std::max_element(L.begin(), L.end());
  if (!(top > 0.0)) {
    out.group.assign(n, tau / static_cast<double>(n));
    out.replacement.assign(n, 1.0 / static_cast<double>(n));
    return out;
  }
  // Zero-smoothness rows still need p_i > 0; give them a negligible share.
  std::vector<double> weight(L.begin(), L.end());
  for (double& w : weight) w = std::max(w, 1e-12 * top);
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);

  out.replacement.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.replacement[i] = weight[i] / total;

  out.group.assign(n, 0.0);
  if (practical) {
    for (std::size_t i = 0; i < n; ++i) out.group[i] = std::min(weight[i] * tau / total, 1.0);
    return out;
  }
  std::vector<bool> pinned(n, false);
  std::size_t pinned_count = 0;
  while (true) {
    const double budget = tau - static_cast<double>(pinned_count);
    double free_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!pinned[i]) free_mass += weight[i];
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) continue;
      out.group[i] = budget * weight[i] / free_mass;
      if (out.group[i] > 1.0) {
        pinned[i] = true;
        out.group[i] = 1.0;
        ++pinned_count;
        changed = true;
      }
    }
    if (!changed || pinned_count == n) break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (pinned[i]) out.group[i] = 1.0;
  }
  return out;
}

SmoothnessProfile profile_for(const CompositeProblem& problem, const SamplerSpec& spec) {
  const auto L = problem.component_smoothness();
  switch (spec.scheme()) {
    case Scheme::TauNice:
      return bounds_tau_nice(L, problem.L_f(), spec.copies());
    case Scheme::Independent:
    case Scheme::Group:
      return bounds_group(L, problem.L_f(), spec);
    case Scheme::WithReplacement:
      return bounds_with_replacement(L, problem.L_f(), spec.copies(), spec.probabilities());
  }
  throw std::invalid_argument("unknown sampling scheme");
}

}  // namespace loopless
