#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loopless/random.hpp"

namespace loopless {

enum class Scheme { TauNice, Independent, Group, WithReplacement };

const char* to_string(Scheme scheme);

/// Immutable description of a minibatch law over [0, n).
///
/// TauNice draws a uniform subset of size tau. Independent includes each i
/// with probability p_i. Group partitions [0, n) and picks at most one member
/// per group, member i with probability p_i. WithReplacement takes tau i.i.d.
/// copies from a distribution p~.
///
/// Weights follow theta_i = 1/p_i for samplings and 1/(tau p~_i) with
/// replacement, which makes E[theta_S I_S] e = e.
class SamplerSpec {
 public:
  static SamplerSpec tau_nice(std::size_t n, std::size_t tau);
  /// Expected size is sum(p). Every p_i must lie in (0, 1].
  static SamplerSpec independent(std::vector<double> p);
  /// groups must partition [0, n) with per-group mass <= 1 + 1e-12.
  static SamplerSpec group(std::vector<double> p, std::vector<std::vector<std::size_t>> groups);
  static SamplerSpec with_replacement(std::vector<double> distribution, std::size_t copies);

  Scheme scheme() const { return scheme_; }
  std::size_t n() const { return n_; }
  /// Expected batch size counting multiplicity.
  double tau() const { return tau_; }
  std::size_t copies() const { return copies_; }

  /// Inclusion probabilities p_i (samplings) or draw distribution p~_i.
  std::span<const double> probabilities() const { return probabilities_; }
  double probability(std::size_t i) const { return probabilities_[i]; }
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }
  bool isolated(std::size_t i) const;

  double weight(std::size_t i) const;

 private:
  SamplerSpec() = default;

  Scheme scheme_ = Scheme::TauNice;
  std::size_t n_ = 0;
  double tau_ = 0.0;
  std::size_t copies_ = 0;
  std::vector<double> probabilities_;
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<std::size_t> group_of_;
};

/// Greedy construction over the indices in the given order: a group is closed
/// just before the index whose marginal would push its mass above one.
/// Throws when some p_i is outside (0, 1] or, unless allow_deficit is set,
/// when sum(p) differs from tau by more than 1e-9.
SamplerSpec build_group_sampling(std::span<const double> p, double tau, bool allow_deficit = false);

struct BatchEntry {
  std::size_t index;
  std::size_t multiplicity;
  double weight;
};

/// One realized batch. Entry (i, m, theta) contributes m * theta at index i of
/// theta_S I_S e. Entries are sorted by index.
struct DrawnBatch {
  std::vector<BatchEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const;  // counting multiplicity
};

/// Draws batches from a spec. Holds scratch state (Fisher-Yates permutation,
/// alias tables) so a sampler belongs to a single run.
class Sampler {
 public:
  explicit Sampler(SamplerSpec spec);

  const SamplerSpec& spec() const { return spec_; }
  DrawnBatch draw(Rng& rng);

 private:
  SamplerSpec spec_;
  std::vector<std::size_t> permutation_;
  std::vector<double> alias_probability_;
  std::vector<std::size_t> alias_;
  std::vector<std::size_t> counts_;
};

struct Outcome {
  DrawnBatch batch;
  double probability;
};

inline constexpr double kMaxEnumeratedOutcomes = 1e6;

/// Every outcome with nonzero probability. Throws std::length_error when the
/// outcome count would exceed max_outcomes.
std::vector<Outcome> enumerate_outcomes(const SamplerSpec& spec,
                                        double max_outcomes = kMaxEnumeratedOutcomes);

/// Probability that the realized batch equals `indices` (a set); 0 when absent.
double outcome_probability(std::span<const Outcome> outcomes, std::span<const std::size_t> indices);

/// P(i in S) from an enumerated outcome list.
std::vector<double> inclusion_probabilities(std::span<const Outcome> outcomes, std::size_t n);

/// Whether sum_C P(C) theta_C I_C e equals the all-ones vector within tol.
bool verify_weight_identity(std::span<const Outcome> outcomes, std::size_t n, double tol = 1e-10);
bool verify_weight_identity(const SamplerSpec& spec, double tol = 1e-10);

}  // namespace loopless
