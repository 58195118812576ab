#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "loopless/problem.hpp"
#include "loopless/random.hpp"
#include "loopless/sampling.hpp"

namespace testing_support {

using namespace loopless;

inline double gaussian(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::vector<double> random_vector(Rng& rng, std::size_t d, double scale = 1.0) {
  std::vector<double> v(d);
  for (double& x : v) x = scale * gaussian(rng);
  return v;
}

/// Dense Gaussian rows, labels in {-1, +1} (or targets for squared loss).
inline CompositeProblem random_problem(Rng& rng, std::size_t n, std::size_t d, LossKind kind,
                                       double lambda1 = 0.0, double lambda2 = 0.0, double density = 1.0) {
  std::vector<std::vector<SparseEntry>> rows(n);
  for (auto& row : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      if (density >= 1.0 || uniform01(rng) < density) row.push_back({j, gaussian(rng)});
    }
    if (row.empty()) row.push_back({uniform_index(rng, d), gaussian(rng)});
  }
  std::vector<double> labels(n);
  for (double& y : labels) {
    if (kind == LossKind::Squared) {
      y = gaussian(rng);
    } else if (kind == LossKind::SigmoidSquared) {
      y = uniform01(rng) < 0.5 ? 0.0 : 1.0;
    } else {
      y = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    }
  }
  return CompositeProblem(DesignMatrix(d, std::move(rows)), std::move(labels), kind, lambda1, lambda2);
}

/// One outcome as a map index -> (multiplicity, weight).
struct BruteOutcome {
  std::map<std::size_t, std::pair<std::size_t, double>> entries;
  double probability = 0.0;
};

/// Outcome law written directly from each scheme's definition, without the
/// library's enumerator.
inline std::vector<BruteOutcome> brute_outcomes(const SamplerSpec& spec) {
  const std::size_t n = spec.n();
  std::vector<BruteOutcome> out;
  if (spec.scheme() == Scheme::WithReplacement) {
    const std::size_t tau = spec.copies();
    std::map<std::vector<std::size_t>, double> law;  // multiplicity vector -> probability
    std::vector<std::size_t> draw(tau, 0);
    while (true) {
      std::vector<std::size_t> counts(n, 0);
      double prob = 1.0;
      for (std::size_t t = 0; t < tau; ++t) {
        ++counts[draw[t]];
        prob *= spec.probability(draw[t]);
      }
      law[counts] += prob;
      std::size_t pos = 0;
      while (pos < tau && ++draw[pos] == n) draw[pos++] = 0;
      if (pos == tau) break;
    }
    for (const auto& [counts, prob] : law) {
      BruteOutcome o;
      o.probability = prob;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] > 0) o.entries[i] = {counts[i], 1.0 / (static_cast<double>(tau) * spec.probability(i))};
      }
      out.push_back(o);
    }
    return out;
  }
  std::vector<std::size_t> group_of(n, 0);
  for (std::size_t g = 0; g < spec.groups().size(); ++g) {
    for (std::size_t i : spec.groups()[g]) group_of[i] = g;
  }
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double prob = 0.0;
    const auto size = static_cast<std::size_t>(__builtin_popcountll(mask));
    switch (spec.scheme()) {
      case Scheme::TauNice: {
        if (size != spec.copies()) break;
        double subsets = 1.0;
        for (std::size_t k = 0; k < size; ++k) subsets = subsets * static_cast<double>(n - k) / static_cast<double>(k + 1);
        prob = 1.0 / subsets;
        break;
      }
      case Scheme::Independent: {
        prob = 1.0;
        for (std::size_t i = 0; i < n; ++i) prob *= (mask >> i & 1) ? spec.probability(i) : 1.0 - spec.probability(i);
        break;
      }
      case Scheme::Group: {
        prob = 1.0;
        for (std::size_t g = 0; g < spec.groups().size(); ++g) {
          std::size_t chosen = 0;
          double mass = 0.0;
          double pick = 1.0;
          for (std::size_t i : spec.groups()[g]) {
            mass += spec.probability(i);
            if (mask >> i & 1) {
              ++chosen;
              pick = spec.probability(i);
            }
          }
          if (chosen > 1) prob = 0.0;
          else prob *= chosen == 1 ? pick : std::max(0.0, 1.0 - mass);
        }
        break;
      }
      case Scheme::WithReplacement:
        break;
    }
    if (prob <= 0.0) continue;
    BruteOutcome o;
    o.probability = prob;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) o.entries[i] = {1, 1.0 / spec.probability(i)};
    }
    out.push_back(o);
  }
  return out;
}

inline DrawnBatch to_batch(const BruteOutcome& o) {
  DrawnBatch b;
  for (const auto& [i, mw] : o.entries) b.entries.push_back({i, mw.first, mw.second});
  return b;
}

/// E_S ||sum (m theta / n)(grad f_i(x) - grad f_i(y)) - c (grad f(x) - grad f(y))||^2 with c = 0 or 1,
/// accumulated from per-component gradients over brute-force outcomes.
inline double brute_moment(const CompositeProblem& problem, const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<BruteOutcome>& outcomes, bool centered) {
  const std::size_t d = problem.d();
  const double n = static_cast<double>(problem.n());
  std::vector<double> mean(d, 0.0);
  if (centered) {
    for (std::size_t i = 0; i < problem.n(); ++i) {
      for (const auto& e : component_gradient(problem, i, x)) mean[e.index] += e.value / n;
      for (const auto& e : component_gradient(problem, i, y)) mean[e.index] -= e.value / n;
    }
  }
  double total = 0.0;
  for (const auto& o : outcomes) {
    std::vector<double> v(d, 0.0);
    for (const auto& [i, mw] : o.entries) {
      const double c = static_cast<double>(mw.first) * mw.second / n;
      for (const auto& e : component_gradient(problem, i, x)) v[e.index] += c * e.value;
      for (const auto& e : component_gradient(problem, i, y)) v[e.index] -= c * e.value;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (v[j] - mean[j]) * (v[j] - mean[j]);
    total += o.probability * s;
  }
  return total;
}

/// f(x) - f(y) - <grad f(y), x - y> from component gradients.
inline double brute_bregman(const CompositeProblem& problem, const std::vector<double>& x, const std::vector<double>& y) {
  double inner = 0.0;
  const double n = static_cast<double>(problem.n());
  for (std::size_t i = 0; i < problem.n(); ++i) {
    for (const auto& e : component_gradient(problem, i, y)) inner += e.value / n * (x[e.index] - y[e.index]);
  }
  return problem.f(x) - problem.f(y) - inner;
}

/// x after steps of x <- prox(x - eta u), one at a time.
inline double naive_delayed(long steps, double u, double x, double eta, double l1, double l2) {
  for (long s = 0; s < steps; ++s) x = prox_coordinate(x - eta * u, eta, l1, l2);
  return x;
}

/// (y, z) after steps of the L-Katyusha coordinate recursion with sigma1 = 0
/// semantics generalised: z <- prox_{eta/((1+eta s1)L)}((eta s1 x + z - (eta/L) u)/(1 + eta s1)),
/// y <- x + theta1 (z+ - z), x = theta1 z + theta2 w + theta3 y.
inline std::pair<double, double> naive_katyusha(long steps, double u, double y, double z, double w, double theta1,
                                                double theta2, double eta, double L, double sigma1, double l1,
                                                double l2) {
  const double theta3 = 1.0 - theta1 - theta2;
  for (long s = 0; s < steps; ++s) {
    const double x = theta1 * z + theta2 * w + theta3 * y;
    const double es = eta * sigma1;
    const double zn = prox_coordinate((es * x + z - eta / L * u) / (1.0 + es), eta / ((1.0 + es) * L), l1, l2);
    y = x + theta1 * (zn - z);
    z = zn;
  }
  return {y, z};
}

inline bool close_rel(double a, double b, double rel, double floor = 1.0) {
  return std::abs(a - b) <= rel * std::max({floor, std::abs(a), std::abs(b)});
}

}  // namespace testing_support
