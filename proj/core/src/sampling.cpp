#include "loopless/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace loopless {

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::TauNice:
      return "tau-nice";
    case Scheme::Independent:
      return "independent";
    case Scheme::Group:
      return "group";
    case Scheme::WithReplacement:
      return "with-replacement";
  }
  return "unknown";
}

namespace {
constexpr double kGroupMassSlack = 1e-12;

void check_marginals(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("sampling over an empty index set");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0 && p[i] <= 1.0)) {
      throw std::invalid_argument("marginal p_" + std::to_string(i) + " = " +
                                  std::to_string(p[i]) + " is outside (0, 1]");
    }
  }
}
}  // namespace

SamplerSpec SamplerSpec::tau_nice(std::size_t n, std::size_t tau) {
  if (n == 0 || tau < 1 || tau > n) {
    throw std::invalid_argument("tau-nice sampling needs 1 <= tau <= n (tau=" +
                                std::to_string(tau) + ", n=" + std::to_string(n) + ")");
  }
  SamplerSpec s;
  s.scheme_ = Scheme::TauNice;
  s.n_ = n;
  s.tau_ = static_cast<double>(tau);
  s.copies_ = tau;
  s.probabilities_.assign(n, static_cast<double>(tau) / static_cast<double>(n));
  return s;
}

SamplerSpec SamplerSpec::independent(std::vector<double> p) {
  check_marginals(p);
  SamplerSpec s;
  s.scheme_ = Scheme::Independent;
  s.n_ = p.size();
  s.tau_ = std::accumulate(p.begin(), p.end(), 0.0);
  s.probabilities_ = std::move(p);
  s.groups_.resize(s.n_);
  s.group_of_.resize(s.n_);
  for (std::size_t i = 0; i < s.n_; ++i) {
    s.groups_[i] = {i};
    s.group_of_[i] = i;
  }
  return s;
}

SamplerSpec SamplerSpec::group(std::vector<double> p, std::vector<std::vector<std::size_t>> groups) {
  check_marginals(p);
  const std::size_t n = p.size();
  std::vector<std::size_t> group_of(n, n);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw std::invalid_argument("empty group");
    double mass = 0.0;
    for (std::size_t i : groups[g]) {
      if (i >= n) throw std::invalid_argument("group member out of range");
      if (group_of[i] != n) throw std::invalid_argument("groups overlap at index " + std::to_string(i));
      group_of[i] = g;
      mass += p[i];
    }
    if (mass > 1.0 + kGroupMassSlack) {
      throw std::invalid_argument("group " + std::to_string(g) + " has mass " +
                                  std::to_string(mass) + " > 1");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (group_of[i] == n) throw std::invalid_argument("index " + std::to_string(i) + " is in no group");
  }
  SamplerSpec s;
  s.scheme_ = Scheme::Group;
  s.n_ = n;
  s.tau_ = std::accumulate(p.begin(), p.end(), 0.0);
  s.probabilities_ = std::move(p);
  s.groups_ = std::move(groups);
  s.group_of_ = std::move(group_of);
  return s;
}

SamplerSpec SamplerSpec::with_replacement(std::vector<double> distribution, std::size_t copies) {
  if (distribution.empty()) throw std::invalid_argument("sampling over an empty index set");
  if (copies < 1) throw std::invalid_argument("sampling with replacement needs at least one copy");
  double total = 0.0;
  for (std::size_t i = 0; i < distribution.size(); ++i) {
    if (!(distribution[i] > 0.0)) {
      throw std::invalid_argument("draw probability p~_" + std::to_string(i) + " must be positive");
    }
    total += distribution[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("draw distribution sums to " + std::to_string(total) + ", not 1");
  }
  SamplerSpec s;
  s.scheme_ = Scheme::WithReplacement;
  s.n_ = distribution.size();
  s.tau_ = static_cast<double>(copies);
  s.copies_ = copies;
  s.probabilities_ = std::move(distribution);
  return s;
}

bool SamplerSpec::isolated(std::size_t i) const {
  if (scheme_ == Scheme::Independent) return true;
  if (scheme_ != Scheme::Group) return false;
  return groups_[group_of_[i]].size() == 1;
}

double SamplerSpec::weight(std::size_t i) const {
  if (scheme_ == Scheme::WithReplacement) {
    return 1.0 / (static_cast<double>(copies_) * probabilities_[i]);
  }
  return 1.0 / probabilities_[i];
}

SamplerSpec build_group_sampling(std::span<const double> p, double tau, bool allow_deficit) {
  check_marginals(p);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (allow_deficit ? total > tau + 1e-9 : std::abs(total - tau) > 1e-9) {
    throw std::invalid_argument("marginals sum to " + std::to_string(total) +
                                ", expected tau = " + std::to_string(tau));
  }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> current;
  double mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!current.empty() && mass + p[i] > 1.0 + kGroupMassSlack) {
      groups.push_back(std::move(current));
      current.clear();
      mass = 0.0;
    }
    current.push_back(i);
    mass += p[i];
  }
  groups.push_back(std::move(current));
  return SamplerSpec::group(std::vector<double>(p.begin(), p.end()), std::move(groups));
}

std::size_t DrawnBatch::size() const {
  std::size_t s = 0;
  for (const auto& e : entries) s += e.multiplicity;
  return s;
}

Sampler::Sampler(SamplerSpec spec) : spec_(std::move(spec)) {
  const std::size_t n = spec_.n();
  switch (spec_.scheme()) {
    case Scheme::TauNice:
      permutation_.resize(n);
      std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
      break;
    case Scheme::WithReplacement: {
      // Vose's alias method.
      alias_probability_.assign(n, 0.0);
      alias_.assign(n, 0);
      counts_.assign(n, 0);
      std::vector<double> scaled(n);
      std::vector<std::size_t> small, large;
      for (std::size_t i = 0; i < n; ++i) {
        scaled[i] = spec_.probability(i) * static_cast<double>(n);
        (scaled[i] < 1.0 ? small : large).push_back(i);
      }
      while (!small.empty() && !large.empty()) {
        const std::size_t s = small.back();
        small.pop_back();
        const std::size_t l = large.back();
        alias_probability_[s] = scaled[s];
        alias_[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if (scaled[l] < 1.0) {
          large.pop_back();
          small.push_back(l);
        }
      }
      for (std::size_t i : large) alias_probability_[i] = 1.0;
      for (std::size_t i : small) alias_probability_[i] = 1.0;
      break;
    }
    default:
      break;
  }
}

DrawnBatch Sampler::draw(Rng& rng) {
  DrawnBatch batch;
  const std::size_t n = spec_.n();
  switch (spec_.scheme()) {
    case Scheme::TauNice: {
      const std::size_t tau = spec_.copies();
      for (std::size_t k = 0; k < tau; ++k) {
        const std::size_t j = k + uniform_index(rng, n - k);
        std::swap(permutation_[k], permutation_[j]);
      }
      batch.entries.reserve(tau);
      for (std::size_t k = 0; k < tau; ++k) {
        const std::size_t i = permutation_[k];
        batch.entries.push_back({i, 1, spec_.weight(i)});
      }
      break;
    }
    case Scheme::Independent:
      for (std::size_t i = 0; i < n; ++i) {
        if (uniform01(rng) < spec_.probability(i)) batch.entries.push_back({i, 1, spec_.weight(i)});
      }
      break;
    case Scheme::Group:
      for (const auto& group : spec_.groups()) {
        const double u = uniform01(rng);
        double cumulative = 0.0;
        for (std::size_t i : group) {
          cumulative += spec_.probability(i);
          if (u < cumulative) {
            batch.entries.push_back({i, 1, spec_.weight(i)});
            break;
          }
        }
      }
      break;
    case Scheme::WithReplacement: {
      std::vector<std::size_t> touched;
      for (std::size_t c = 0; c < spec_.copies(); ++c) {
        const std::size_t column = uniform_index(rng, n);
        const std::size_t i = uniform01(rng) < alias_probability_[column] ? column : alias_[column];
        if (counts_[i]++ == 0) touched.push_back(i);
      }
      for (std::size_t i : touched) {
        batch.entries.push_back({i, counts_[i], spec_.weight(i)});
        counts_[i] = 0;
      }
      break;
    }
  }
  std::sort(batch.entries.begin(), batch.entries.end(),
            [](const BatchEntry& a, const BatchEntry& b) { return a.index < b.index; });
  return batch;
}

namespace {

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t j = 1; j <= k; ++j) r = r * static_cast<double>(n - k + j) / static_cast<double>(j);
  return r;
}

void guard(double count, double max_outcomes) {
  if (count > max_outcomes) {
    throw std::length_error("outcome enumeration needs " + std::to_string(count) +
                            " outcomes, limit is " + std::to_string(max_outcomes));
  }
}

void enumerate_tau_nice(const SamplerSpec& spec, std::vector<Outcome>& out) {
  const std::size_t n = spec.n();
  const std::size_t tau = spec.copies();
  const double prob = 1.0 / binomial(n, tau);
  std::vector<std::size_t> comb(tau);
  std::iota(comb.begin(), comb.end(), std::size_t{0});
  while (true) {
    Outcome o{{}, prob};
    for (std::size_t i : comb) o.batch.entries.push_back({i, 1, spec.weight(i)});
    out.push_back(std::move(o));
    std::size_t k = tau;
    while (k > 0 && comb[k - 1] == n - tau + (k - 1)) --k;
    if (k == 0) break;
    ++comb[k - 1];
    for (std::size_t j = k; j < tau; ++j) comb[j] = comb[j - 1] + 1;
  }
}

// Product measure over groups: each group contributes "nobody" or one member.
void enumerate_groups(const SamplerSpec& spec, std::vector<Outcome>& out) {
  struct Option {
    std::ptrdiff_t member;  // -1 for nobody
    double probability;
  };
  std::vector<std::vector<Option>> options;
  for (const auto& group : spec.groups()) {
    std::vector<Option> opts;
    double mass = 0.0;
    for (std::size_t i : group) mass += spec.probability(i);
    const double none = 1.0 - mass;
    if (none > 0.0) opts.push_back({-1, none});
    for (std::size_t i : group) opts.push_back({static_cast<std::ptrdiff_t>(i), spec.probability(i)});
    options.push_back(std::move(opts));
  }
  std::vector<std::size_t> choice(options.size(), 0);
  while (true) {
    Outcome o{{}, 1.0};
    for (std::size_t g = 0; g < options.size(); ++g) {
      const auto& opt = options[g][choice[g]];
      o.probability *= opt.probability;
      if (opt.member >= 0) {
        const auto i = static_cast<std::size_t>(opt.member);
        o.batch.entries.push_back({i, 1, spec.weight(i)});
      }
    }
    std::sort(o.batch.entries.begin(), o.batch.entries.end(),
              [](const BatchEntry& a, const BatchEntry& b) { return a.index < b.index; });
    out.push_back(std::move(o));
    std::size_t g = 0;
    while (g < options.size() && ++choice[g] == options[g].size()) choice[g++] = 0;
    if (g == options.size()) break;
  }
}

// Multisets as compositions m_0 + ... + m_{n-1} = tau with probability
// tau! / prod(m_i!) * prod(p~_i^m_i).
void enumerate_compositions(const SamplerSpec& spec, std::size_t i, std::size_t remaining,
                            double log_p, std::vector<BatchEntry>& prefix,
                            std::vector<Outcome>& out) {
  const std::size_t n = spec.n();
  const auto take = [&](std::size_t m) {
    return m == 0 ? 0.0
                  : static_cast<double>(m) * std::log(spec.probability(i)) -
                        std::lgamma(static_cast<double>(m) + 1.0);
  };
  if (i + 1 == n) {
    if (remaining > 0) prefix.push_back({i, remaining, spec.weight(i)});
    out.push_back({DrawnBatch{prefix}, std::exp(log_p + take(remaining))});
    if (remaining > 0) prefix.pop_back();
    return;
  }
  for (std::size_t m = 0; m <= remaining; ++m) {
    if (m > 0) prefix.push_back({i, m, spec.weight(i)});
    enumerate_compositions(spec, i + 1, remaining - m, log_p + take(m), prefix, out);
    if (m > 0) prefix.pop_back();
  }
}

void enumerate_with_replacement(const SamplerSpec& spec, std::vector<Outcome>& out) {
  std::vector<BatchEntry> prefix;
  const double log_tau_fact = std::lgamma(static_cast<double>(spec.copies()) + 1.0);
  enumerate_compositions(spec, 0, spec.copies(), log_tau_fact, prefix, out);
}

}  // namespace

std::vector<Outcome> enumerate_outcomes(const SamplerSpec& spec, double max_outcomes) {
  std::vector<Outcome> out;
  switch (spec.scheme()) {
    case Scheme::TauNice:
      guard(binomial(spec.n(), spec.copies()), max_outcomes);
      enumerate_tau_nice(spec, out);
      break;
    case Scheme::Independent:
    case Scheme::Group: {
      double count = 1.0;
      for (const auto& g : spec.groups()) count *= static_cast<double>(g.size() + 1);
      guard(count, max_outcomes);
      enumerate_groups(spec, out);
      break;
    }
    case Scheme::WithReplacement:
      guard(binomial(spec.n() + spec.copies() - 1, spec.copies()), max_outcomes);
      enumerate_with_replacement(spec, out);
      break;
  }
  return out;
}

double outcome_probability(std::span<const Outcome> outcomes, std::span<const std::size_t> indices) {
  std::vector<std::size_t> wanted(indices.begin(), indices.end());
  std::sort(wanted.begin(), wanted.end());
  double total = 0.0;
  for (const auto& o : outcomes) {
    if (o.batch.entries.size() != wanted.size()) continue;
    bool same = true;
    for (std::size_t k = 0; k < wanted.size() && same; ++k) {
      same = o.batch.entries[k].index == wanted[k] && o.batch.entries[k].multiplicity == 1;
    }
    if (same) total += o.probability;
  }
  return total;
}

std::vector<double> inclusion_probabilities(std::span<const Outcome> outcomes, std::size_t n) {
  std::vector<double> p(n, 0.0);
  for (const auto& o : outcomes) {
    for (const auto& e : o.batch.entries) p[e.index] += o.probability;
  }
  return p;
}

bool verify_weight_identity(std::span<const Outcome> outcomes, std::size_t n, double tol) {
  std::vector<double> mean(n, 0.0);
  for (const auto& o : outcomes) {
    for (const auto& e : o.batch.entries) {
      mean[e.index] += o.probability * static_cast<double>(e.multiplicity) * e.weight;
    }
  }
  return std::all_of(mean.begin(), mean.end(), [tol](double v) { return std::abs(v - 1.0) <= tol; });
}

bool verify_weight_identity(const SamplerSpec& spec, double tol) {
  return verify_weight_identity(enumerate_outcomes(spec), spec.n(), tol);
}

}  // namespace loopless
