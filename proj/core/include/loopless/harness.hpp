#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "loopless/problem.hpp"
#include "loopless/sampling.hpp"
#include "loopless/smoothness.hpp"
#include "loopless/solvers.hpp"

namespace loopless {

struct LibsvmData {
  DesignMatrix data;
  std::vector<double> labels;
};

/// Lines "label idx:val ..." with 1-based strictly increasing indices. Blank
/// lines are skipped. Errors are std::runtime_error naming the line number.
LibsvmData parse_libsvm(std::istream& in, const std::string& source = "<stream>");
LibsvmData parse_libsvm(const std::string& path);

struct ReferenceOptimum {
  std::vector<double> x;
  double value = 0.0;
  double grad_map_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;  // false when the iteration cap was hit first
};

/// Accelerated proximal gradient with adaptive restart and step 1/L_f, run
/// until the gradient mapping norm falls to tol.
ReferenceOptimum reference_optimum(const CompositeProblem& problem, double tol = 1e-12,
                                   std::size_t max_iterations = 200000);

/// `# key=value` lines, then the column header, then one line per row with
/// 17 significant digits.
void write_csv(std::ostream& out, const RunRecord& record);
void write_csv(const std::string& path, const RunRecord& record);
RunRecord read_csv(std::istream& in);

inline constexpr const char* kCsvHeader = "iter,epoch,wall_seconds,subopt,grad_map_norm,refreshes";

struct SyntheticSpec {
  std::size_t n = 100;
  std::size_t d = 20;
  double density = 1.0;
  std::uint64_t seed = 1;
  bool normalize_rows = true;
  /// Rows 0..heavy_rows-1 get their norm multiplied by heavy_factor.
  std::size_t heavy_rows = 0;
  double heavy_factor = 1.0;
  double flip_fraction = 0.1;
};

/// Sparse Gaussian features (at least one nonzero per row) and +-1 labels
/// from a planted hyperplane with a fraction of them flipped.
LibsvmData make_synthetic(const SyntheticSpec& spec);

enum class SamplingChoice { Uniform, ImportanceGroup, Group, Independent, Replacement, ImportanceReplacement };

const char* to_string(SamplingChoice choice);
SamplingChoice parse_sampling_choice(const std::string& name);
Algorithm parse_algorithm(const std::string& name);
LossKind parse_loss(const std::string& name);
KatyushaRefresh parse_katyusha_refresh(const std::string& name);

/// Uniform choices use marginals tau/n; importance choices use
/// importance_marginals over the problem's L_i.
SamplerSpec make_sampler_spec(const CompositeProblem& problem, SamplingChoice choice, std::size_t tau);

/// L-SVRG regime implied by the problem: nonconvex loss, else strongly convex
/// when mu > 0, else convex.
Regime default_regime(const CompositeProblem& problem);

struct OptimizerChoice {
  Algorithm algorithm = Algorithm::LSvrg;
  Regime regime = Regime::StronglyConvex;
  double p = 0.0;
  bool lazy = false;
  KatyushaRefresh refresh = KatyushaRefresh::CoupledPoint;
};

struct BuiltOptimizer {
  std::unique_ptr<Optimizer> optimizer;
  std::vector<std::pair<std::string, std::string>> schedule;  // constants for metadata
  bool lazy = false;
  std::string notice;  // set when lazy mode was requested but unavailable
};

BuiltOptimizer make_optimizer(const CompositeProblem& problem, const SmoothnessProfile& profile,
                              const OptimizerChoice& choice, std::vector<double> x0);

struct ExperimentConfig {
  std::string data_path;
  std::optional<SyntheticSpec> synthetic;
  LossKind loss = LossKind::Logistic;
  Algorithm algorithm = Algorithm::LSvrg;
  SamplingChoice sampling = SamplingChoice::Uniform;
  std::size_t tau = 1;
  std::optional<double> p;  // default tau / n
  double lambda1 = 1e-4;
  double lambda2 = 0.0;
  double epochs = 30.0;
  std::size_t record_every = 0;  // 0 means about once per epoch
  bool lazy = false;
  KatyushaRefresh katyusha_refresh = KatyushaRefresh::CoupledPoint;
  std::uint64_t seed = 1;
  std::string output_path;
  double reference_tol = 1e-12;
};

struct ExperimentResult {
  RunRecord record;
  SmoothnessProfile profile;
  double reference_value = 0.0;
  std::string notice;
};

CompositeProblem load_problem(const ExperimentConfig& config);

/// Builds problem, profile, schedule and sampler, runs, and writes the CSV
/// when an output path is set. Errors carry the failing stage.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string format_double(double value);

}  // namespace loopless
