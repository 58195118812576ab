#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "loopless/diagnostics.hpp"
#include "loopless/smoothness.hpp"
#include "support.hpp"

using namespace loopless;
using namespace testing_support;

namespace {

// Deterministic proximal gradient, step 1/L_f, until the gradient mapping is
// at rounding level. Independent of the library's accelerated reference.
std::pair<std::vector<double>, double> solve(const CompositeProblem& problem) {
  std::vector<double> x(problem.d(), 0.0);
  const double eta = 1.0 / problem.L_f();
  for (int it = 0; it < 200000; ++it) {
    const auto g = full_gradient(problem, x);
    double moved = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double next = prox_coordinate(x[j] - eta * g[j], eta, problem.lambda1(), problem.lambda2());
      moved = std::max(moved, std::abs(next - x[j]));
      x[j] = next;
    }
    if (moved == 0.0) break;
  }
  return {x, problem.objective(x)};
}

std::vector<double> near(Rng& rng, const std::vector<double>& center, double scale) {
  auto v = center;
  for (double& x : v) x += scale * gaussian(rng);
  return v;
}

void expect_holds(const ProbeCheck& c, const std::string& what) {
  EXPECT_TRUE(c.holds()) << what << ": lhs " << c.lhs << " > rhs " << c.rhs << " (excess " << c.lhs - c.rhs << ")";
}

}  // namespace

TEST(Moments, MatchBruteForce) {
  Rng rng(1);
  auto problem = random_problem(rng, 4, 3, LossKind::Logistic);
  for (const auto& spec : {SamplerSpec::tau_nice(4, 2), SamplerSpec::with_replacement({0.1, 0.2, 0.3, 0.4}, 2),
                           SamplerSpec::independent({0.3, 0.9, 0.5, 0.6})}) {
    const auto outcomes = enumerate_outcomes(spec);
    const auto brute = brute_outcomes(spec);
    const auto x = random_vector(rng, 3), y = random_vector(rng, 3);
    EXPECT_NEAR(estimator_second_moment(problem, x, y, outcomes), brute_moment(problem, x, y, brute, false), 1e-12);
    EXPECT_NEAR(centered_second_moment(problem, x, y, outcomes), brute_moment(problem, x, y, brute, true), 1e-12);
    EXPECT_NEAR(bregman(problem, x, y), brute_bregman(problem, x, y), 1e-12);
    GradTable table(problem, y);
    const auto mean = expected_estimator(problem, table, x, outcomes);
    const auto truth = full_gradient(problem, x);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(mean[j], truth[j], 1e-12);
  }
}

TEST(Lyapunov, ZeroAndReducedValues) {
  Rng rng(2);
  auto problem = random_problem(rng, 3, 2, LossKind::Squared, 0.0, 0.3);
  const auto [xs, ps] = solve(problem);
  const auto spec = SamplerSpec::tau_nice(3, 1);
  const auto outcomes = enumerate_outcomes(spec);
  const auto profile = profile_for(problem, spec);
  const auto cfg = lsvrg_schedule(profile, problem, Regime::StronglyConvex, 1.0 / 3);

  const auto t1 = strongly_convex_probe(problem, cfg, xs, ps);
  EXPECT_EQ(lyapunov_value(t1, problem, ProbeState{xs, xs, {}, {}}, outcomes), 0.0);

  const auto t4 = nonconvex_probe(problem, profile, lsvrg_schedule(profile, problem, Regime::Nonconvex, 1.0 / 3));
  const auto x = random_vector(rng, 2);
  EXPECT_EQ(lyapunov_value(t4, problem, ProbeState{x, x, {}, {}}, outcomes), problem.f(x));

  const auto kcfg = lkatyusha_schedule(profile, problem, 1.0 / 3);
  const auto t2 = momentum_probe(problem, profile, kcfg, xs, ps);
  EXPECT_EQ(lyapunov_value(t2, problem, ProbeState{{}, xs, xs, xs}, outcomes), 0.0);
}

TEST(Lyapunov, ProbeCoefficientsAreClosedForms) {
  Rng rng(3);
  auto problem = random_problem(rng, 3, 2, LossKind::Squared, 0.0, 0.2);
  const auto [xs, ps] = solve(problem);
  const auto profile = profile_for(problem, SamplerSpec::tau_nice(3, 1));
  const double p = 0.4;
  const auto cfg = lsvrg_schedule(profile, problem, Regime::StronglyConvex, p);
  const double eta = cfg.eta;
  const auto t1 = strongly_convex_probe(problem, cfg, xs, ps);
  EXPECT_DOUBLE_EQ(t1.variance_weight, 4 * eta * eta / (p * (1 + eta * 0.2)));
  const auto t3 = convex_probe(problem, lsvrg_schedule(profile, problem, Regime::Convex, p), xs, ps);
  const double eta3 = t3.lsvrg.eta;
  EXPECT_DOUBLE_EQ(t3.alpha, 6 * eta3 / (5 * p));
  EXPECT_DOUBLE_EQ(t3.beta, 5 / (6 * eta3));
  const auto t4 = nonconvex_probe(problem, profile, lsvrg_schedule(profile, problem, Regime::Nonconvex, p));
  const double eta4 = t4.lsvrg.eta;
  EXPECT_DOUBLE_EQ(t4.alpha, 3 * eta4 * eta4 * problem.L_f() * profile.L3 / p);
  EXPECT_DOUBLE_EQ(t4.beta, p / (3 * eta4));
}

TEST(ExpectedOneStep, DeterministicFullBatchMatchesOneStep) {
  Rng rng(4);
  auto problem = random_problem(rng, 3, 2, LossKind::Squared, 0.05, 0.3);
  const auto [xs, ps] = solve(problem);
  const auto spec = SamplerSpec::independent({1.0, 1.0, 1.0});
  const auto outcomes = enumerate_outcomes(spec);
  ASSERT_EQ(outcomes.size(), 1u);
  const auto profile = profile_for(problem, spec);
  const auto cfg = lsvrg_schedule(profile, problem, Regime::StronglyConvex, 1.0);
  const auto probe = strongly_convex_probe(problem, cfg, xs, ps);
  LSvrgState state(problem, random_vector(rng, 2));
  state.w = random_vector(rng, 2);
  state.table.refresh(problem, state.w);
  const ProbeState before{state.x, state.w, {}, {}};
  const double expected = expected_one_step(probe, problem, before, outcomes);
  lsvrg_step(problem, state, cfg, outcomes[0].batch, true);
  EXPECT_NEAR(expected, lyapunov_value(probe, problem, ProbeState{state.x, state.w, {}, {}}, outcomes), 1e-14);
}

TEST(StronglyConvexContraction, ContractionOnSerialQuadratic) {
  Rng rng(5);
  for (double l1 : {0.0, 0.05}) {
    auto problem = random_problem(rng, 3, 2, LossKind::Squared, l1, 0.1);
    const auto [xs, ps] = solve(problem);
    const auto spec = SamplerSpec::tau_nice(3, 1);
    const auto outcomes = enumerate_outcomes(spec);
    const auto profile = profile_for(problem, spec);
    for (double p : {1.0 / 3, 0.1, 1.0}) {
      const auto probe = strongly_convex_probe(problem, lsvrg_schedule(profile, problem, Regime::StronglyConvex, p), xs, ps);
      for (int s = 0; s < 20; ++s) {
        const ProbeState state{near(rng, xs, 1.0), near(rng, xs, 1.0), {}, {}};
        expect_holds(check_one_step(probe, problem, state, outcomes), "strongly convex");
      }
    }
  }
}

TEST(StronglyConvexContraction, ContractionUnderOtherSamplings) {
  Rng rng(6);
  auto problem = random_problem(rng, 4, 3, LossKind::Logistic, 0.01, 0.05);
  const auto [xs, ps] = solve(problem);
  for (const auto& spec : {SamplerSpec::tau_nice(4, 2), SamplerSpec::with_replacement({0.1, 0.2, 0.3, 0.4}, 2),
                           build_group_sampling(std::vector<double>{0.6, 0.5, 0.5, 0.4}, 2.0)}) {
    const auto outcomes = enumerate_outcomes(spec);
    const auto profile = profile_for(problem, spec);
    const auto probe = strongly_convex_probe(problem, lsvrg_schedule(profile, problem, Regime::StronglyConvex, 0.5), xs, ps);
    for (int s = 0; s < 20; ++s) {
      const ProbeState state{near(rng, xs, 1.0), near(rng, xs, 1.0), {}, {}};
      expect_holds(check_one_step(probe, problem, state, outcomes), to_string(spec.scheme()));
    }
  }
}

namespace {

struct MomentumInstance {
  CompositeProblem problem;
  SamplerSpec spec;
  ContractionProbe probe;
};

// Random small instances until each of the four parameter cases has one.
std::vector<MomentumInstance> momentum_instances(Rng& rng, KatyushaRefresh refresh) {
  std::vector<MomentumInstance> out;
  std::set<int> cases;
  for (int trial = 0; trial < 400 && cases.size() < 4; ++trial) {
    const double l2 = std::exp(uniform(rng, -6.0, 1.0));
    const double l1 = trial % 2 == 0 ? 0.0 : 0.02;
    auto problem = random_problem(rng, 4, 2, trial % 3 == 0 ? LossKind::Squared : LossKind::Logistic, l1, l2);
    const std::size_t tau = 1 + uniform_index(rng, 4);
    const auto spec = SamplerSpec::tau_nice(4, tau);
    const auto profile = profile_for(problem, spec);
    const double p = std::exp(uniform(rng, -4.0, 0.0));
    auto kcfg = lkatyusha_schedule(profile, problem, p);
    kcfg.refresh = refresh;
    const auto [xs, ps] = solve(problem);
    auto probe = momentum_probe(problem, profile, kcfg, xs, ps);
    if (!cases.insert(probe.katyusha_case).second) continue;
    out.push_back({std::move(problem), spec, std::move(probe)});
  }
  return out;
}

}  // namespace

// The one-step bound relies on E[P(w+)] = (1-p) P(w) + p P(y^k), so it is
// checked for the variant whose refresh takes y^k.
TEST(MomentumContraction, ContractionInEveryParameterCaseWithPreviousYRefresh) {
  Rng rng(7);
  const auto instances = momentum_instances(rng, KatyushaRefresh::PreviousY);
  std::set<int> cases;
  for (const auto& inst : instances) {
    cases.insert(inst.probe.katyusha_case);
    EXPECT_GE(inst.probe.q, 2.0 / 3.0 - 1e-15);
    EXPECT_LT(inst.probe.q, 1.0);
    const auto outcomes = enumerate_outcomes(inst.spec);
    const auto& xs = inst.probe.x_star;
    for (int s = 0; s < 20; ++s) {
      const ProbeState state{{}, near(rng, xs, 0.5), near(rng, xs, 0.5), near(rng, xs, 0.5)};
      expect_holds(check_one_step(inst.probe, inst.problem, state, outcomes),
                   "momentum case " + std::to_string(inst.probe.katyusha_case));
    }
  }
  EXPECT_EQ(cases, (std::set<int>{11, 12, 21, 22}));
}

// With the default refresh w <- x^k the same bound is false in case 1.1:
// a state violating it by a wide margin exists.
TEST(MomentumContraction, CoupledPointRefreshHasCounterexampleInCase11) {
  Rng rng(7);
  const auto instances = momentum_instances(rng, KatyushaRefresh::CoupledPoint);
  const MomentumInstance* case11 = nullptr;
  for (const auto& inst : instances) {
    if (inst.probe.katyusha_case == 11) case11 = &inst;
  }
  ASSERT_NE(case11, nullptr);
  const auto outcomes = enumerate_outcomes(case11->spec);
  const auto& xs = case11->probe.x_star;
  double worst = 0.0;
  for (int s = 0; s < 200; ++s) {
    const ProbeState state{{}, near(rng, xs, 0.5), near(rng, xs, 0.5), near(rng, xs, 0.5)};
    const auto c = check_one_step(case11->probe, case11->problem, state, outcomes);
    worst = std::max(worst, (c.lhs - c.rhs) / std::abs(c.rhs));
  }
  EXPECT_GT(worst, 1e-3);
}

TEST(MomentumContraction, QPerCase) {
  auto unit = [](double l2) {
    return CompositeProblem(DesignMatrix::from_dense({{1.0}}), {1.0}, LossKind::Squared, 0.0, l2);
  };
  SmoothnessProfile profile;
  profile.L1 = profile.L2 = 1.0;
  // L_f = 1 <= L2 / p: case 1, r = sqrt(mu / (L2 p)).
  auto p12 = unit(0.01);
  auto probe12 = momentum_probe(p12, profile, lkatyusha_schedule(profile, p12, 0.1), {0.0}, 0.0);
  EXPECT_EQ(probe12.katyusha_case, 12);
  EXPECT_NEAR(probe12.q, 1.0 - std::sqrt(0.1) / 3.0, 1e-15);
  auto p11 = unit(0.5);
  auto probe11 = momentum_probe(p11, profile, lkatyusha_schedule(profile, p11, 0.1), {0.0}, 0.0);
  EXPECT_EQ(probe11.katyusha_case, 11);
  EXPECT_DOUBLE_EQ(probe11.q, 2.0 / 3.0);
  // L2 = 0.1, p = 1: L_f = 1 > L2 / p, case 2 with r = sqrt(mu / L_f).
  profile.L2 = 0.1;
  auto p22 = unit(0.01);
  auto probe22 = momentum_probe(p22, profile, lkatyusha_schedule(profile, p22, 1.0), {0.0}, 0.0);
  EXPECT_EQ(probe22.katyusha_case, 22);
  EXPECT_NEAR(probe22.q, 1.0 - 2.0 / 3.0 * 0.1, 1e-15);
  auto p21 = unit(0.5);
  auto probe21 = momentum_probe(p21, profile, lkatyusha_schedule(profile, p21, 1.0), {0.0}, 0.0);
  EXPECT_EQ(probe21.katyusha_case, 21);
  EXPECT_DOUBLE_EQ(probe21.q, 2.0 / 3.0);
}

TEST(ConvexInequality, CombinedInequalityInConvexRegime) {
  Rng rng(8);
  for (double l1 : {0.0, 0.05}) {
    auto problem = random_problem(rng, 4, 3, LossKind::Logistic, l1, 0.0);
    const auto [xs, ps] = solve(problem);
    for (const auto& spec : {SamplerSpec::tau_nice(4, 1), SamplerSpec::tau_nice(4, 3)}) {
      const auto outcomes = enumerate_outcomes(spec);
      const auto profile = profile_for(problem, spec);
      for (double p : {0.25, 1.0}) {
        const auto probe = convex_probe(problem, lsvrg_schedule(profile, problem, Regime::Convex, p), xs, ps);
        for (int s = 0; s < 20; ++s) {
          const ProbeState state{near(rng, xs, 1.0), near(rng, xs, 1.0), {}, {}};
          expect_holds(check_one_step(probe, problem, state, outcomes), "convex");
        }
      }
    }
  }
}

TEST(NonconvexDescent, DescentInNonconvexRegime) {
  Rng rng(9);
  auto problem = random_problem(rng, 4, 3, LossKind::SigmoidSquared);
  for (const auto& spec : {SamplerSpec::tau_nice(4, 1), SamplerSpec::tau_nice(4, 2),
                           SamplerSpec::with_replacement({0.1, 0.2, 0.3, 0.4}, 2)}) {
    const auto outcomes = enumerate_outcomes(spec);
    const auto profile = profile_for(problem, spec);
    for (double p : {0.25, 0.5, 1.0}) {
      const auto probe = nonconvex_probe(problem, profile, lsvrg_schedule(profile, problem, Regime::Nonconvex, p));
      for (int s = 0; s < 20; ++s) {
        const ProbeState state{random_vector(rng, 3, 2.0), random_vector(rng, 3, 2.0), {}, {}};
        expect_holds(check_one_step(probe, problem, state, outcomes), "nonconvex");
      }
    }
  }
}

TEST(ProbeCheck, SlackIsRelative) {
  EXPECT_TRUE((ProbeCheck{1.0 + 1e-11, 1.0}).holds());
  EXPECT_FALSE((ProbeCheck{1.0 + 1e-8, 1.0}).holds());
  EXPECT_TRUE((ProbeCheck{1e6 + 1e-5, 1e6}).holds());
}
