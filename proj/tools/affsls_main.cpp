// affsls: simulate, compare, validate, generate-data.
//
// Exit codes: 0 success, 1 comparison failure, 2 usage or config error,
// 3 numerical or feasibility failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "affsls/config.hpp"
#include "affsls/data_driven.hpp"
#include "affsls/harness.hpp"
#include "affsls/log_io.hpp"
#include "affsls/plot.hpp"
#include "affsls/suites.hpp"

namespace fs = std::filesystem;
using namespace affsls;

namespace {

constexpr int kOk = 0;
constexpr int kCompareFail = 1;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

constexpr const char* kOutEnv = "AFFSLS_OUT_DIR";

struct Options {
  std::string config;
  std::string out;
  double tol = -1.0;
  std::optional<std::uint64_t> seed;
  bool no_plot = false;
  std::string log_a, log_b;
};

std::string output_dir(const Options& o, const RunConfig& cfg) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return cfg.output_dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string text_of(const ClosedLoopLog& log) {
  std::ostringstream ss;
  write_log_csv(ss, log);
  return ss.str();
}

void load_data_file(RunConfig& cfg) {
  if (!cfg.data_file) return;
  const std::string path = resolved_data_file(cfg);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read data file '" + path + "'");
  cfg.benchmark->data = read_trajectory_csv(in, path);
}

int cmd_simulate(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (!cfg.benchmark) throw ConfigError("simulate: config needs a system section");
  if (o.seed && cfg.benchmark->recipe) cfg.benchmark->recipe->seed = *o.seed;
  load_data_file(cfg);
  const fs::path dir = output_dir(o, cfg);
  fs::create_directories(dir);
  const double tol = o.tol >= 0 ? o.tol : cfg.compare_tol;

  std::vector<ClosedLoopLog> logs;
  std::vector<RunSummary> runs;
  int status = kOk;
  for (Formulation f : cfg.controllers) {
    BenchmarkSpec spec = *cfg.benchmark;
    spec.controller = f;
    RunSummary run;
    run.controller = to_string(f);
    run.log_file = run.controller + ".csv";
    ClosedLoopLog log;
    try {
      log = run_receding_horizon(spec);
      run.completed = true;
    } catch (const RecedingHorizonAbort& e) {
      log = e.partial_log();
      run.failure = e.what();
      std::cerr << run.controller << ": " << e.what() << "\n";
      status = kNumerical;
    } catch (const PersistencyError& e) {
      run.failure = e.what();
      std::cerr << run.controller << ": " << e.what() << "\n";
      status = kNumerical;
    } catch (const ExcitationError& e) {
      run.failure = e.what();
      std::cerr << run.controller << ": " << e.what() << "\n";
      status = kNumerical;
    }
    run.steps = log.length();
    for (const auto& s : log.steps) run.max_kkt_residual = std::max(run.max_kkt_residual, s.kkt_residual);
    run.constraint_violation = constraint_violation(log, spec.cons);
    if (log.length() > 0) {
      write_file(dir / run.log_file, text_of(log));
      logs.push_back(log);
    } else {
      run.log_file.clear();
    }
    std::printf("%-12s %s  steps %d  final x = [", run.controller.c_str(),
                run.completed ? "optimal" : "aborted", run.steps);
    if (!log.x.empty()) {
      for (Index i = 0; i < log.x.back().size(); ++i) {
        std::printf("%s%.6f", i ? ", " : "", log.x.back()(i));
      }
    }
    std::printf("]\n");
    runs.push_back(run);
  }

  std::vector<ComparisonSummary> comparisons;
  for (size_t i = 1; i < logs.size(); ++i) {
    if (logs[i].x.size() != logs[0].x.size()) continue;
    ComparisonSummary c{logs[0].controller, logs[i].controller, compare_logs(logs[0], logs[i], tol)};
    std::printf("%s vs %s: %s\n", c.a.c_str(), c.b.c_str(), format_report(c.report).c_str());
    comparisons.push_back(c);
  }
  write_file(dir / "summary.json", summary_json(runs, comparisons));
  if (cfg.plot && !o.no_plot && !logs.empty()) {
    write_file(dir / "trajectories.svg", render_svg(logs, cfg.labels));
  }
  std::printf("outputs written to %s\n", dir.string().c_str());
  return status;
}

int cmd_compare(const Options& o) {
  auto read = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read log '" + path + "'");
    try {
      return read_log_csv(in, fs::path(path).stem().string());
    } catch (const std::runtime_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  };
  const ClosedLoopLog a = read(o.log_a), b = read(o.log_b);
  DeviationReport r;
  try {
    r = compare_logs(a, b, o.tol >= 0 ? o.tol : 1e-4);
  } catch (const DimensionError& e) {
    throw ConfigError(e.what());
  }
  std::printf("%s\n", format_report(r).c_str());
  return r.pass ? kOk : kCompareFail;
}

int cmd_validate(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.validate.seed = *o.seed;
  const auto results = run_suites(cfg.validate);
  int status = kOk;
  for (const auto& r : results) {
    std::printf("%-34s %s %.3e (%s %.0e)\n", r.property.c_str(), r.pass ? "PASS" : "FAIL",
                r.value, r.lower_bound ? ">=" : "<=", r.threshold);
    if (!r.pass) {
      std::fprintf(stderr, "property violated: %s\n", r.property.c_str());
      status = kNumerical;
    }
  }
  return status;
}

int cmd_generate_data(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (!cfg.benchmark || !cfg.benchmark->recipe) {
    throw ConfigError("generate-data: config needs a system section and a data recipe "
                      "(data.length, data.seed)");
  }
  const BenchmarkSpec& b = *cfg.benchmark;
  DataRecipe recipe = *b.recipe;
  if (o.seed) recipe.seed = *o.seed;
  const int order = b.state_dim() + (b.horizon + 1) + 1;
  const int minimum = min_length_for_pe(b.input_dim(), order);
  if (recipe.length < minimum) {
    std::fprintf(stderr,
                 "data length %d is below the minimum %d for excitation of order %d\n",
                 recipe.length, minimum, order);
    return kNumerical;
  }
  TrajectoryData data;
  try {
    data = generate_excitation(b.plant(), recipe.length, b.horizon, recipe.box, recipe.seed);
  } catch (const ExcitationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kNumerical;
  }
  fs::path path;
  if (!o.out.empty()) {
    path = o.out;
  } else {
    path = fs::path(output_dir(o, cfg)) / "trajectory.csv";
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ostringstream ss;
  write_trajectory_csv(ss, data);
  write_file(path, ss.str());

  int achieved = order;
  while (is_pe(data.u_data, achieved + 1).persistently_exciting) ++achieved;
  const PeReport pe = is_pe(data.u_data, order);
  std::printf("wrote %d samples to %s\n", data.length(), path.string().c_str());
  std::printf("required excitation order %d, achieved %d\n", order, achieved);
  std::printf("input Hankel singular value ratio at order %d: %.6e\n", order, pe.ratio());
  std::printf("provenance: %s\n", data.generated_by.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affine system level synthesis: receding-horizon benchmark and checks"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Run the configured controllers in closed loop");
  sim->add_option("--config", o.config, "JSON run configuration")->required();
  sim->add_option("--out", o.out, "Output directory (overrides AFFSLS_OUT_DIR and the config)");
  sim->add_option("--tol", o.tol, "Cross-controller comparison tolerance");
  sim->add_option("--seed", o.seed, "Override the data generation seed");
  sim->add_flag("--no-plot", o.no_plot, "Skip the SVG plot");

  auto* cmp = app.add_subcommand("compare", "Compare two closed-loop logs");
  cmp->add_option("log_a", o.log_a, "First log")->required();
  cmp->add_option("log_b", o.log_b, "Second log")->required();
  cmp->add_option("--tol", o.tol, "Tolerance on the infinity-norm deviation (default 1e-4)");

  auto* val = app.add_subcommand("validate", "Run the randomized parameterization suites");
  val->add_option("--config", o.config, "JSON run configuration")->required();
  val->add_option("--seed", o.seed, "Override the suite seed");

  auto* gen = app.add_subcommand("generate-data", "Record an exciting trajectory of the system");
  gen->add_option("--config", o.config, "JSON run configuration")->required();
  gen->add_option("--out", o.out, "Output file (default <output dir>/trajectory.csv)");
  gen->add_option("--seed", o.seed, "Override the data generation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (cmp->parsed()) return cmd_compare(o);
    if (val->parsed()) return cmd_validate(o);
    if (gen->parsed()) return cmd_generate_data(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kUsage;
}
