#include "loopless/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "loopless/lazy.hpp"
#include "loopless/random.hpp"

namespace loopless {

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

[[noreturn]] void parse_error(const std::string& source, std::size_t line, const std::string& what) {
  throw std::runtime_error(source + ":" + std::to_string(line) + ": " + what);
}

bool parse_number(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

LibsvmData parse_libsvm(std::istream& in, const std::string& source) {
  std::vector<std::vector<SparseEntry>> rows;
  std::vector<double> labels;
  std::size_t cols = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token)) continue;
    double label;
    if (!parse_number(token, label)) parse_error(source, line_no, "label '" + token + "' is not a number");
    std::vector<SparseEntry> row;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) parse_error(source, line_no, "expected idx:val, got '" + token + "'");
      const std::string_view idx_text(token.data(), colon);
      const std::string_view val_text(token.data() + colon + 1, token.size() - colon - 1);
      std::size_t idx = 0;
      const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
      if (ec != std::errc() || ptr != idx_text.data() + idx_text.size()) {
        parse_error(source, line_no, "index '" + std::string(idx_text) + "' is not an integer");
      }
      if (idx < 1) parse_error(source, line_no, "feature index must be >= 1");
      double value;
      if (!parse_number(val_text, value)) {
        parse_error(source, line_no, "value '" + std::string(val_text) + "' is not a number");
      }
      if (!row.empty() && idx - 1 <= row.back().index) {
        parse_error(source, line_no, "feature indices must be strictly increasing");
      }
      row.push_back({idx - 1, value});
      cols = std::max(cols, idx);
    }
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (in.bad()) throw std::runtime_error(source + ": read error");
  return {DesignMatrix(cols, std::move(rows)), std::move(labels)};
}

LibsvmData parse_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file '" + path + "'");
  return parse_libsvm(in, path);
}

ReferenceOptimum reference_optimum(const CompositeProblem& problem, double tol,
                                   std::size_t max_iterations) {
  const std::size_t d = problem.d();
  const double step = problem.L_f() > 0.0 ? 1.0 / problem.L_f() : 1.0;
  std::vector<double> x(d, 0.0);
  std::vector<double> y = x;
  std::vector<double> shifted(d);
  double t = 1.0;
  ReferenceOptimum out;
  out.grad_map_norm = gradient_mapping_norm(problem, x, step);
  while (out.grad_map_norm > tol && out.iterations < max_iterations) {
    const auto g = full_gradient(problem, y);
    for (std::size_t j = 0; j < d; ++j) shifted[j] = y[j] - step * g[j];
    auto next = prox_psi(problem, step, shifted);
    double restart = 0.0;
    for (std::size_t j = 0; j < d; ++j) restart += (y[j] - next[j]) * (next[j] - x[j]);
    if (restart > 0.0) {
      t = 1.0;
      y = next;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double momentum = (t - 1.0) / t_next;
      for (std::size_t j = 0; j < d; ++j) y[j] = next[j] + momentum * (next[j] - x[j]);
      t = t_next;
    }
    x = std::move(next);
    ++out.iterations;
    out.grad_map_norm = gradient_mapping_norm(problem, x, step);
  }
  out.converged = out.grad_map_norm <= tol;
  out.value = problem.objective(x);
  out.x = std::move(x);
  return out;
}

void write_csv(std::ostream& out, const RunRecord& record) {
  for (const auto& [key, value] : record.metadata) out << "# " << key << '=' << value << '\n';
  out << kCsvHeader << '\n';
  for (const auto& row : record.rows) {
    out << row.iteration << ',' << format_double(row.epoch) << ',' << format_double(row.wall_seconds) << ','
        << format_double(row.suboptimality) << ',' << format_double(row.grad_map_norm) << ','
        << row.refreshes << '\n';
  }
}

void write_csv(const std::string& path, const RunRecord& record) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  write_csv(out, record);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

RunRecord read_csv(std::istream& in) {
  RunRecord record;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) parse_error("csv", line_no, "metadata line without '='");
      record.metadata.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (!header_seen) {
      if (line != kCsvHeader) parse_error("csv", line_no, "unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) fields.push_back(cell);
    if (fields.size() != 6) parse_error("csv", line_no, "expected 6 columns");
    RecordRow row;
    double values[4];
    for (int c = 0; c < 4; ++c) {
      if (!parse_number(fields[c + 1], values[c])) parse_error("csv", line_no, "bad number '" + fields[c + 1] + "'");
    }
    auto parse_count = [&](const std::string& text) {
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        parse_error("csv", line_no, "bad count '" + text + "'");
      }
      return v;
    };
    row.iteration = parse_count(fields[0]);
    row.epoch = values[0];
    row.wall_seconds = values[1];
    row.suboptimality = values[2];
    row.grad_map_norm = values[3];
    row.refreshes = parse_count(fields[5]);
    record.rows.push_back(row);
  }
  if (!header_seen) throw std::runtime_error("csv: missing header");
  return record;
}

namespace {

// Box-Muller on uniform01 so the stream is the same on every standard library.
double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

LibsvmData make_synthetic(const SyntheticSpec& spec) {
  if (spec.n == 0 || spec.d == 0) throw std::invalid_argument("synthetic data needs n, d >= 1");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) {
    throw std::invalid_argument("synthetic density must lie in (0, 1]");
  }
  if (spec.heavy_rows > spec.n) throw std::invalid_argument("more heavy rows than rows");
  Rng rng(spec.seed);
  std::vector<std::vector<SparseEntry>> rows(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto& row = rows[i];
    for (std::size_t j = 0; j < spec.d; ++j) {
      if (uniform01(rng) < spec.density) row.push_back({j, standard_normal(rng)});
    }
    if (row.empty()) {
      const std::size_t j = uniform_index(rng, spec.d);
      row.push_back({j, standard_normal(rng)});
    }
    double scale = 1.0;
    if (spec.normalize_rows) {
      double s = 0.0;
      for (const auto& e : row) s += e.value * e.value;
      if (s > 0.0) scale = 1.0 / std::sqrt(s);
    }
    if (i < spec.heavy_rows) scale *= spec.heavy_factor;
    for (auto& e : row) e.value *= scale;
  }
  std::vector<double> plane(spec.d);
  for (double& b : plane) b = standard_normal(rng);
  DesignMatrix data(spec.d, std::move(rows));
  std::vector<double> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    labels[i] = data.dot_row(i, plane) >= 0.0 ? 1.0 : -1.0;
    if (uniform01(rng) < spec.flip_fraction) labels[i] = -labels[i];
  }
  return {std::move(data), std::move(labels)};
}

const char* to_string(SamplingChoice choice) {
  switch (choice) {
    case SamplingChoice::Uniform:
      return "uniform";
    case SamplingChoice::ImportanceGroup:
      return "importance-group";
    case SamplingChoice::Group:
      return "group";
    case SamplingChoice::Independent:
      return "independent";
    case SamplingChoice::Replacement:
      return "replacement";
    case SamplingChoice::ImportanceReplacement:
      return "importance-replacement";
  }
  return "unknown";
}

SamplingChoice parse_sampling_choice(const std::string& name) {
  for (auto c : {SamplingChoice::Uniform, SamplingChoice::ImportanceGroup, SamplingChoice::Group,
                 SamplingChoice::Independent, SamplingChoice::Replacement,
                 SamplingChoice::ImportanceReplacement}) {
    if (name == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown sampling '" + name + "'");
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "lsvrg") return Algorithm::LSvrg;
  if (name == "lkatyusha") return Algorithm::LKatyusha;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

LossKind parse_loss(const std::string& name) {
  for (auto k : {LossKind::Logistic, LossKind::Squared, LossKind::SigmoidSquared}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown loss '" + name + "'");
}

KatyushaRefresh parse_katyusha_refresh(const std::string& name) {
  for (auto r : {KatyushaRefresh::CoupledPoint, KatyushaRefresh::PreviousY}) {
    if (name == to_string(r)) return r;
  }
  throw std::invalid_argument("unknown refresh point '" + name + "'");
}

SamplerSpec make_sampler_spec(const CompositeProblem& problem, SamplingChoice choice, std::size_t tau) {
  const std::size_t n = problem.n();
  if (tau < 1 || tau > n) {
    throw std::invalid_argument("tau must lie in [1, n] (tau=" + std::to_string(tau) + ", n=" +
                                std::to_string(n) + ")");
  }
  const double td = static_cast<double>(tau);
  const std::vector<double> uniform(n, td / static_cast<double>(n));
  switch (choice) {
    case SamplingChoice::Uniform:
      return SamplerSpec::tau_nice(n, tau);
    case SamplingChoice::Independent:
      return SamplerSpec::independent(uniform);
    case SamplingChoice::Group:
      return build_group_sampling(uniform, td);
    case SamplingChoice::Replacement:
      return SamplerSpec::with_replacement(std::vector<double>(n, 1.0 / static_cast<double>(n)), tau);
    case SamplingChoice::ImportanceGroup:
      return build_group_sampling(importance_marginals(problem.component_smoothness(), td).group, td);
    case SamplingChoice::ImportanceReplacement:
      return SamplerSpec::with_replacement(importance_marginals(problem.component_smoothness(), td).replacement,
                                           tau);
  }
  throw std::invalid_argument("unknown sampling choice");
}

Regime default_regime(const CompositeProblem& problem) {
  if (problem.loss() == LossKind::SigmoidSquared) return Regime::Nonconvex;
  return problem.mu() > 0.0 ? Regime::StronglyConvex : Regime::Convex;
}

BuiltOptimizer make_optimizer(const CompositeProblem& problem, const SmoothnessProfile& profile,
                              const OptimizerChoice& choice, std::vector<double> x0) {
  BuiltOptimizer out;
  const bool lazy_possible = problem.lambda2() > 0.0;
  if (choice.lazy && !lazy_possible) {
    out.notice = "lazy updates need lambda2 > 0; using dense updates";
  }
  out.lazy = choice.lazy && lazy_possible;
  if (choice.algorithm == Algorithm::LSvrg) {
    const auto config = lsvrg_schedule(profile, problem, choice.regime, choice.p);
    out.schedule = {{"regime", to_string(config.regime)}, {"eta", format_double(config.eta)}};
    if (out.lazy) {
      out.optimizer = std::make_unique<LazyLSvrg>(problem, config, std::move(x0));
    } else {
      out.optimizer = std::make_unique<DenseLSvrg>(problem, config, std::move(x0));
    }
  } else {
    auto config = lkatyusha_schedule(profile, problem, choice.p);
    config.refresh = choice.refresh;
    out.schedule = {{"theta1", format_double(config.theta1)}, {"theta2", format_double(config.theta2)},
                    {"eta", format_double(config.eta)},       {"L", format_double(config.L)},
                    {"sigma1", format_double(config.sigma1)}, {"sigma2", format_double(config.sigma2)},
                    {"refresh_point", to_string(config.refresh)}};
    if (out.lazy) {
      out.optimizer = std::make_unique<LazyLKatyusha>(problem, config, std::move(x0));
    } else {
      out.optimizer = std::make_unique<DenseLKatyusha>(problem, config, std::move(x0));
    }
  }
  return out;
}

CompositeProblem load_problem(const ExperimentConfig& config) {
  if (config.data_path.empty() == !config.synthetic.has_value()) {
    throw std::invalid_argument("exactly one of a data path or a synthetic spec is required");
  }
  LibsvmData data = config.synthetic ? make_synthetic(*config.synthetic) : parse_libsvm(config.data_path);
  return CompositeProblem(std::move(data.data), std::move(data.labels), config.loss, config.lambda1,
                          config.lambda2);
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(name) + ": " + e.what());
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto problem = stage("loading problem", [&] { return load_problem(config); });
  const auto spec = stage("building sampler", [&] { return make_sampler_spec(problem, config.sampling, config.tau); });
  ExperimentResult result;
  result.profile = stage("estimating smoothness", [&] { return profile_for(problem, spec); });
  const double n = static_cast<double>(problem.n());
  const double p = config.p.value_or(std::min(1.0, spec.tau() / n));
  const auto reference = stage("reference optimum", [&] { return reference_optimum(problem, config.reference_tol); });
  result.reference_value = reference.value;

  OptimizerChoice choice;
  choice.algorithm = config.algorithm;
  choice.regime = default_regime(problem);
  choice.p = p;
  choice.lazy = config.lazy;
  choice.refresh = config.katyusha_refresh;
  auto built = stage("building optimizer", [&] {
    return make_optimizer(problem, result.profile, choice, std::vector<double>(problem.d(), 0.0));
  });
  result.notice = built.notice;

  Sampler sampler(spec);
  Rng rng(config.seed);
  RunOptions options;
  options.max_epochs = config.epochs;
  options.record_every = config.record_every > 0
                             ? config.record_every
                             : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n / spec.tau())));
  options.reference_value = reference.value;
  result.record = stage("running", [&] { return run(problem, *built.optimizer, sampler, rng, options); });

  auto& r = result.record;
  r.metadata.clear();
  r.set("algorithm", to_string(config.algorithm));
  if (config.synthetic) {
    const auto& s = *config.synthetic;
    r.set("synthetic", std::to_string(s.n) + "," + std::to_string(s.d) + "," + format_double(s.density));
    r.set("data_seed", std::to_string(s.seed));
    r.set("heavy_rows", std::to_string(s.heavy_rows));
    r.set("heavy_factor", format_double(s.heavy_factor));
  } else {
    r.set("data", config.data_path);
  }
  r.set("loss", to_string(config.loss));
  r.set("sampler", to_string(config.sampling));
  r.set("tau", std::to_string(config.tau));
  r.set("p", format_double(p));
  r.set("lambda1", format_double(config.lambda1));
  r.set("lambda2", format_double(config.lambda2));
  r.set("seed", std::to_string(config.seed));
  r.set("epochs", format_double(config.epochs));
  r.set("record_every", std::to_string(options.record_every));
  r.set("lazy", built.lazy ? "1" : "0");
  r.set("L1", format_double(result.profile.L1));
  r.set("L2", format_double(result.profile.L2));
  r.set("L3", format_double(result.profile.L3));
  r.set("L_f", format_double(problem.L_f()));
  r.set("L_bar", format_double(problem.L_bar()));
  for (const auto& [key, value] : built.schedule) r.set(key, value);
  r.set("p_star", format_double(reference.value));
  r.set("reference_converged", reference.converged ? "1" : "0");

  if (!config.output_path.empty()) {
    stage("writing csv", [&] {
      write_csv(config.output_path, r);
      return 0;
    });
  }
  return result;
}

}  // namespace loopless
