#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "loopless/harness.hpp"
#include "loopless/lazy.hpp"

using namespace loopless;

namespace {

CompositeProblem sparse_problem(std::size_t d, double density) {
  SyntheticSpec s;
  s.n = 1000;
  s.d = d;
  s.density = density;
  s.seed = 3;
  auto data = make_synthetic(s);
  return CompositeProblem(std::move(data.data), std::move(data.labels), LossKind::Logistic, 1e-4, 1e-3);
}

template <typename Make>
void drive(benchmark::State& state, Make make) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto problem = sparse_problem(d, 10.0 / static_cast<double>(d));
  const auto spec = SamplerSpec::tau_nice(problem.n(), 4);
  const auto profile = profile_for(problem, spec);
  std::unique_ptr<Optimizer> opt = make(problem, profile, std::vector<double>(d, 0.0));
  Sampler sampler(spec);
  Rng rng(1);
  for (auto _ : state) {
    const auto batch = sampler.draw(rng);
    opt->step(batch, bernoulli(rng, opt->refresh_probability()));
  }
  benchmark::DoNotOptimize(opt->iteration());
  state.SetItemsProcessed(state.iterations());
}

constexpr double kP = 0.004;

void BM_DenseLSvrg(benchmark::State& state) {
  drive(state, [](const CompositeProblem& pr, const SmoothnessProfile& prof, std::vector<double> x0) {
    return std::make_unique<DenseLSvrg>(pr, lsvrg_schedule(prof, pr, Regime::StronglyConvex, kP), std::move(x0));
  });
}

void BM_LazyLSvrg(benchmark::State& state) {
  drive(state, [](const CompositeProblem& pr, const SmoothnessProfile& prof, std::vector<double> x0) {
    return std::make_unique<LazyLSvrg>(pr, lsvrg_schedule(prof, pr, Regime::StronglyConvex, kP), std::move(x0));
  });
}

void BM_DenseLKatyusha(benchmark::State& state) {
  drive(state, [](const CompositeProblem& pr, const SmoothnessProfile& prof, std::vector<double> x0) {
    return std::make_unique<DenseLKatyusha>(pr, lkatyusha_schedule(prof, pr, kP), std::move(x0));
  });
}

void BM_LazyLKatyusha(benchmark::State& state) {
  drive(state, [](const CompositeProblem& pr, const SmoothnessProfile& prof, std::vector<double> x0) {
    return std::make_unique<LazyLKatyusha>(pr, lkatyusha_schedule(prof, pr, kP), std::move(x0));
  });
}

void BM_DelayedUpdate(benchmark::State& state) {
  const auto steps = state.range(0);
  double x = 0.7;
  for (auto _ : state) {
    x = delayed_update(0, steps, 0.3, x, 0.05, 1e-3, 1e-2);
    benchmark::DoNotOptimize(x);
  }
}

void BM_SamplerDraw(benchmark::State& state) {
  const auto tau = static_cast<std::size_t>(state.range(0));
  Sampler sampler(SamplerSpec::tau_nice(10000, tau));
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.draw(rng));
}

}  // namespace

BENCHMARK(BM_DenseLSvrg)->Arg(1000)->Arg(10000);
BENCHMARK(BM_LazyLSvrg)->Arg(1000)->Arg(10000);
BENCHMARK(BM_DenseLKatyusha)->Arg(1000)->Arg(10000);
BENCHMARK(BM_LazyLKatyusha)->Arg(1000)->Arg(10000);
BENCHMARK(BM_DelayedUpdate)->Arg(1)->Arg(100)->Arg(10000);
BENCHMARK(BM_SamplerDraw)->Arg(1)->Arg(16)->Arg(256);

BENCHMARK_MAIN();
