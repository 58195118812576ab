// Command-line front end: run, constants, bench.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "loopless/harness.hpp"

namespace {

using namespace loopless;

struct DataFlags {
  std::string data;
  std::string synthetic;
  std::uint64_t data_seed = 1;
  std::size_t heavy_rows = 0;
  double heavy_factor = 1.0;
  std::string loss = "logistic";
  std::string sampling = "uniform";
  std::size_t tau = 1;
  double lambda1 = 1e-4;
  double lambda2 = 0.0;
};

struct RunFlags {
  std::string algo = "lsvrg";
  double p = 0.0;
  double epochs = 30.0;
  std::uint64_t seed = 1;
  bool lazy = false;
  std::string katyusha_refresh = "coupled";
  std::size_t record_every = 0;
  std::string out;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_data_flags(CLI::App& app, DataFlags& f) {
  app.add_option("--data", f.data, "LIBSVM file");
  app.add_option("--synthetic", f.synthetic, "synthetic data n,d,density");
  app.add_option("--data-seed", f.data_seed, "seed of the synthetic generator");
  app.add_option("--heavy-rows", f.heavy_rows, "rows whose norm is scaled by --heavy-factor");
  app.add_option("--heavy-factor", f.heavy_factor, "row-norm multiplier for heavy rows");
  app.add_option("--loss", f.loss, "logistic | squared | sigmoid-squared");
  app.add_option("--sampling", f.sampling,
                 "uniform | importance-group | group | independent | replacement | importance-replacement");
  app.add_option("--tau", f.tau, "expected batch size");
  app.add_option("--lambda1", f.lambda1, "l1 weight");
  app.add_option("--lambda2", f.lambda2, "l2 weight");
}

void add_run_flags(CLI::App& app, RunFlags& f, bool with_out) {
  app.add_option("--algo", f.algo, "lsvrg | lkatyusha");
  app.add_option("--p", f.p, "reference-update probability (default tau/n)");
  app.add_option("--epochs", f.epochs, "epoch budget");
  app.add_option("--seed", f.seed, "run seed");
  app.add_flag("--lazy", f.lazy, "sparse delayed updates (needs lambda2 > 0)");
  app.add_option("--katyusha-refresh", f.katyusha_refresh, "reference point on refresh: coupled | previous-y");
  app.add_option("--record-every", f.record_every, "iterations between rows (default about n/tau)");
  if (with_out) app.add_option("--out", f.out, "output CSV (default stdout)");
}

SyntheticSpec parse_synthetic(const DataFlags& f) {
  SyntheticSpec spec;
  std::istringstream in(f.synthetic);
  char c1 = 0, c2 = 0;
  if (!(in >> spec.n >> c1 >> spec.d >> c2 >> spec.density) || c1 != ',' || c2 != ',' || !in.eof()) {
    throw UsageError("--synthetic expects n,d,density, got '" + f.synthetic + "'");
  }
  spec.seed = f.data_seed;
  spec.heavy_rows = f.heavy_rows;
  spec.heavy_factor = f.heavy_factor;
  return spec;
}

ExperimentConfig make_config(const DataFlags& d, const RunFlags& r) {
  if (d.data.empty() == d.synthetic.empty()) {
    throw UsageError("exactly one of --data or --synthetic is required");
  }
  ExperimentConfig config;
  config.data_path = d.data;
  if (!d.synthetic.empty()) config.synthetic = parse_synthetic(d);
  try {
    config.loss = parse_loss(d.loss);
    config.sampling = parse_sampling_choice(d.sampling);
    config.algorithm = parse_algorithm(r.algo);
    config.katyusha_refresh = parse_katyusha_refresh(r.katyusha_refresh);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  config.tau = d.tau;
  if (r.p > 0.0) config.p = r.p;
  config.lambda1 = d.lambda1;
  config.lambda2 = d.lambda2;
  config.epochs = r.epochs;
  config.seed = r.seed;
  config.lazy = r.lazy;
  config.record_every = r.record_every;
  return config;
}

int cmd_run(const DataFlags& d, const RunFlags& r) {
  auto config = make_config(d, r);
  config.output_path = r.out;
  const auto result = run_experiment(config);
  if (!result.notice.empty()) std::cerr << "note: " << result.notice << '\n';
  if (r.out.empty()) write_csv(std::cout, result.record);
  return 0;
}

int cmd_constants(const DataFlags& d) {
  RunFlags r;
  const auto config = make_config(d, r);
  const auto problem = load_problem(config);
  const auto spec = make_sampler_spec(problem, config.sampling, config.tau);
  const auto profile = profile_for(problem, spec);
  std::printf("sampling %s tau %zu n %zu d %zu\n", to_string(config.sampling), config.tau, problem.n(),
              problem.d());
  std::printf("L1 %s\nL2 %s\nL3 %s\nL_f %s\nL_bar %s\n", format_double(profile.L1).c_str(),
              format_double(profile.L2).c_str(), format_double(profile.L3).c_str(),
              format_double(problem.L_f()).c_str(), format_double(problem.L_bar()).c_str());
  return 0;
}

int cmd_bench(const DataFlags& d, const RunFlags& r, const std::vector<std::size_t>& taus,
              const std::string& out_dir) {
  if (taus.empty()) throw UsageError("--taus needs at least one value");
  std::filesystem::create_directories(out_dir);
  for (std::size_t tau : taus) {
    DataFlags cell = d;
    cell.tau = tau;
    auto config = make_config(cell, r);
    config.output_path = (std::filesystem::path(out_dir) /
                          (r.algo + "_" + d.sampling + "_tau" + std::to_string(tau) + ".csv"))
                             .string();
    const auto result = run_experiment(config);
    const auto& last = result.record.rows.back();
    std::printf("%s tau=%zu epochs=%s subopt=%s\n", config.output_path.c_str(), tau,
                format_double(last.epoch).c_str(), format_double(last.suboptimality).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loopless variance-reduced solvers"};
  app.require_subcommand(1);

  DataFlags run_data, constants_data, bench_data;
  RunFlags run_flags, bench_flags;
  std::vector<std::size_t> taus;
  std::string out_dir = "bench_out";

  auto* run = app.add_subcommand("run", "run one experiment and emit a CSV");
  add_data_flags(*run, run_data);
  add_run_flags(*run, run_flags, true);

  auto* constants = app.add_subcommand("constants", "print expected-smoothness constants");
  add_data_flags(*constants, constants_data);

  auto* bench = app.add_subcommand("bench", "sweep tau, one CSV per value");
  add_data_flags(*bench, bench_data);
  add_run_flags(*bench, bench_flags, false);
  bench->add_option("--taus", taus, "batch sizes to sweep")->delimiter(',');
  bench->add_option("--out-dir", out_dir, "directory for the CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*run) return cmd_run(run_data, run_flags);
    if (*constants) return cmd_constants(constants_data);
    return cmd_bench(bench_data, bench_flags, taus, out_dir);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
