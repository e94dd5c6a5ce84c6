// Command-line harness: problem generation, solver runs with trace output,
// aggregate benchmarks with SVG plots, and convergence-rate tabulation.
//
// Exit codes: 0 success, 2 config error, 3 numeric/regime error, 4 I/O
// error. Every failure prints exactly one line to stderr of the form
//   error: <category>: <message>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "kaczmarz/bench.hpp"
#include "kaczmarz/matrix_io.hpp"
#include "kaczmarz/svg.hpp"
#include "kaczmarz/theory.hpp"
#include "kaczmarz/trace_io.hpp"

namespace kz = kaczmarz;
namespace fs = std::filesystem;

namespace {

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

std::string format_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

std::string hex16(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  std::string kind = "gaussian";
  std::size_t m = 2000;
  std::size_t n = 50;
  std::size_t grid = 16;
  std::size_t rays = 1300;
  std::uint64_t seed = 1;
  std::string corruption = "none";
  double beta = 0.0;
  double uniform_lo = 0.0;
  double uniform_hi = 0.0;
  std::string out_dir = "problem";
};

int cmd_gen(const GenArgs& args) {
  kz::GeneratedProblem problem =
      args.kind == "gaussian"
          ? kz::gen_gaussian_system(args.m, args.n, args.seed)
          : kz::gen_tomography_system(args.grid, args.rays, args.seed);

  // Mirror the harness layout: the problem uses --seed directly; the
  // corruption stream is split off it.
  std::vector<double> labels = problem.system.labels();
  std::vector<std::size_t> support;
  kz::LinearSystem system = std::move(problem.system);
  if (args.corruption != "none") {
    kz::CorruptionSpec spec;
    kz::ExperimentConfig key_map;  // reuse the typed model names
    kz::set_config_key(key_map, "corruption", args.corruption);
    spec.model = key_map.corruption.value();
    spec.beta = args.beta;
    spec.seed = kz::derive_seed(args.seed, 1);
    if (spec.model == kz::CorruptionModel::Uniform &&
        (args.uniform_lo != 0.0 || args.uniform_hi != 0.0)) {
      const auto budget = static_cast<std::size_t>(std::floor(
          args.beta * static_cast<double>(system.rows())));
      spec.layers = {{args.uniform_lo, args.uniform_hi, budget}};
    }
    kz::CorruptionOutcome outcome =
        kz::apply_corruption(system, problem.truth, spec);
    labels = outcome.system.labels();
    support = outcome.support;
    system = std::move(outcome.system);
    problem.truth = std::move(outcome.truth);
  }

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  kz::write_matrix((dir / "matrix.kzmx").string(), system.matrix());
  kz::write_vector_csv((dir / "labels.csv").string(), labels);
  kz::write_vector_csv((dir / "truth.csv").string(), problem.truth);
  kz::write_index_csv((dir / "support.csv").string(), support);

  std::string manifest;
  for (const char* name :
       {"matrix.kzmx", "labels.csv", "truth.csv", "support.csv"}) {
    manifest += "fnv1a64  " +
                hex16(kz::file_checksum((dir / name).string())) + "  " +
                name + "\n";
  }
  std::ofstream mf(dir / "manifest.txt");
  if (!mf) throw kz::IoError("cannot write manifest");
  mf << manifest;
  std::cout << manifest;
  std::cout << "wrote " << system.rows() << "x" << system.cols()
            << " problem (" << support.size() << " corrupted rows) to "
            << args.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// solve / bench

struct HarnessArgs {
  std::string config_path;
  std::vector<std::string> sets;  // ordered key=value overrides
  bool sequential = false;
  // Sugar flags; empty string means "not given" (validated values never are).
  std::string trials, base_seed, out_dir, solvers, x0;
};

kz::ExperimentConfig build_config(const HarnessArgs& args) {
  kz::ExperimentConfig cfg = args.config_path.empty()
                                 ? kz::ExperimentConfig{}
                                 : kz::parse_config_file(args.config_path);
  for (const std::string& kv : args.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw kz::ConfigError("--set expects key=value, got '" + kv + "'");
    kz::set_config_key(cfg, kz::detail::trim(kv.substr(0, eq)),
                       kz::detail::trim(kv.substr(eq + 1)));
  }
  const std::pair<const char*, const std::string*> sugar[] = {
      {"trials", &args.trials},
      {"base_seed", &args.base_seed},
      {"out_dir", &args.out_dir},
      {"solvers", &args.solvers},
      {"x0", &args.x0},
  };
  for (const auto& [key, value] : sugar)
    if (!value->empty()) kz::set_config_key(cfg, key, *value);
  cfg.validate();
  return cfg;
}

std::string trace_name(const kz::SolverRun& run) {
  return "trace_" + run.solver + "_trial" + std::to_string(run.trial) + ".csv";
}

void write_run_files(const fs::path& dir, const std::vector<kz::SolverRun>& runs) {
  for (const kz::SolverRun& run : runs) {
    kz::write_trace_csv((dir / trace_name(run)).string(), run.trace);
    kz::write_vector_csv((dir / ("estimate_" + run.solver + "_trial" +
                                 std::to_string(run.trial) + ".csv"))
                             .string(),
                         run.trace.final_x.x);
  }
}

void print_summaries(const kz::ExperimentConfig& cfg,
                     const std::vector<kz::SolverRun>& runs) {
  for (const std::string& solver : cfg.solvers) {
    const std::optional<double> med = kz::median_final_error(runs, solver);
    std::cout << solver << ": median final rel_error over " << cfg.trials
              << " trial(s) = "
              << (med ? format_sci(*med) : std::string("n/a (no ground truth)"))
              << "\n";
  }
}

int cmd_solve(const HarnessArgs& args) {
  const kz::ExperimentConfig cfg = build_config(args);
  const auto runs = kz::run_trials(cfg, !args.sequential);
  fs::create_directories(cfg.out_dir);
  write_run_files(cfg.out_dir, runs);
  print_summaries(cfg, runs);
  std::cout << "wrote " << runs.size() << " trace(s) to " << cfg.out_dir
            << "\n";
  return 0;
}

void write_aggregate_csv(const std::string& path,
                         const kz::AggregateCurve& curve) {
  std::ofstream out(path);
  if (!out) throw kz::IoError("cannot write '" + path + "'");
  out << "iteration,median_rel_error,q25_rel_error,q75_rel_error,"
         "median_wl_corruption_frac\n";
  const bool has_stats = !curve.median_error.empty();
  for (std::size_t i = 0; i < curve.iterations.size(); ++i) {
    out << curve.iterations[i] << ',';
    if (has_stats)
      out << kz::detail::format_double(curve.median_error[i]) << ','
          << kz::detail::format_double(curve.q25_error[i]) << ','
          << kz::detail::format_double(curve.q75_error[i]) << ','
          << kz::detail::format_double(curve.median_frac[i]);
    else
      out << ",,,";
    out << '\n';
  }
  if (!out) throw kz::IoError("short write to '" + path + "'");
}

int cmd_bench(const HarnessArgs& args) {
  const kz::ExperimentConfig cfg = build_config(args);
  if (cfg.trials < 2)
    throw kz::AggregationError(
        "bench aggregates across trials and needs trials >= 2; "
        "use the solve command for single runs");
  const auto runs = kz::run_trials(cfg, !args.sequential);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_run_files(dir, runs);

  std::vector<kz::PlotSeries> error_series, frac_series;
  for (const std::string& solver : cfg.solvers) {
    const kz::AggregateCurve curve = kz::aggregate_runs(runs, solver);
    write_aggregate_csv((dir / ("aggregate_" + solver + ".csv")).string(),
                        curve);
    if (curve.median_error.empty()) continue;
    kz::PlotSeries errs{solver, {}};
    for (std::size_t i = 0; i < curve.iterations.size(); ++i)
      errs.points.emplace_back(static_cast<double>(curve.iterations[i]),
                               curve.median_error[i]);
    error_series.push_back(std::move(errs));
    if (solver == "wlqrk") {
      kz::PlotSeries fracs{solver, {}};
      for (std::size_t i = 0; i < curve.iterations.size(); ++i)
        fracs.points.emplace_back(static_cast<double>(curve.iterations[i]),
                                  curve.median_frac[i]);
      frac_series.push_back(std::move(fracs));
    }
  }

  if (!error_series.empty()) {
    kz::PlotOptions opt;
    opt.title = "median relative error over " + std::to_string(cfg.trials) +
                " trials";
    opt.x_label = "iteration";
    opt.y_label = "relative error";
    opt.log_y = true;
    kz::write_line_plot((dir / "convergence.svg").string(), error_series, opt);
  } else {
    std::cerr << "warning: no ground truth available; skipping plots\n";
  }
  if (!frac_series.empty()) {
    kz::PlotOptions opt;
    opt.title = "whitelist corruption fraction";
    opt.x_label = "iteration";
    opt.y_label = "corrupted share of whitelist";
    kz::write_line_plot((dir / "wl_corruption.svg").string(), frac_series,
                        opt);
  }

  print_summaries(cfg, runs);
  std::cout << "wrote aggregates and plots to " << cfg.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// rate

struct RateArgs {
  double beta_min = 0.0;
  double beta_max = 0.3;
  std::size_t points = 61;
  double alpha = 0.05;
  std::size_t n = 10;
  std::size_t m = 5000;
  double c_d = 1.0;
  double c_1 = 1.0;
  double c_k = 1.0;
  double d_bound = 1.0;
  double k_subg = 1.0;
  std::string out_csv = "rate.csv";
  std::string out_svg = "rate.svg";
  bool check = false;
};

int cmd_rate(const RateArgs& args) {
  if (args.points < 1) throw kz::ConfigError("need at least one grid point");
  if (args.points > 1 && !(args.beta_max > args.beta_min))
    throw kz::ConfigError("beta_max must exceed beta_min for a grid");
  std::vector<double> betas;
  betas.reserve(args.points);
  for (std::size_t k = 0; k < args.points; ++k)
    betas.push_back(args.points == 1
                        ? args.beta_min
                        : args.beta_min + (args.beta_max - args.beta_min) *
                                              static_cast<double>(k) /
                                              static_cast<double>(args.points - 1));

  kz::TheoryParams params;
  params.c_d = args.c_d;
  params.c_1 = args.c_1;
  params.c_k = args.c_k;
  params.d_bound = args.d_bound;
  params.k_subg = args.k_subg;
  params.n = args.n;
  params.m = args.m;
  params.alpha = args.alpha;
  const std::vector<kz::RatePoint> curve = kz::rate_curve(params, betas);

  std::ofstream out(args.out_csv);
  if (!out) throw kz::IoError("cannot write '" + args.out_csv + "'");
  out << "beta,factor\n";
  for (const kz::RatePoint& p : curve)
    out << kz::detail::format_double(p.beta) << ','
        << kz::detail::format_double(p.factor) << '\n';
  if (!out) throw kz::IoError("short write to '" + args.out_csv + "'");
  std::cout << "wrote " << curve.size() << " point(s) to " << args.out_csv
            << "\n";

  if (curve.size() > 1 && !args.out_svg.empty()) {
    kz::PlotSeries series{"contraction factor", {}};
    for (const kz::RatePoint& p : curve)
      series.points.emplace_back(p.beta, p.factor);
    kz::PlotOptions opt;
    opt.title = "per-iteration contraction factor vs corruption fraction";
    opt.x_label = "beta";
    opt.y_label = "factor";
    kz::write_line_plot(args.out_svg, {series}, opt);
    std::cout << "wrote plot to " << args.out_svg << "\n";
  }

  if (args.check) {
    for (double b : {args.beta_min, args.beta_max}) {
      params.beta = b;
      const kz::ConditionReport rep = kz::check_theorem_conditions(params);
      for (const kz::TheoremCondition* c :
           {&rep.aspect_ratio, &rep.corruption_level}) {
        std::cout << "beta=" << kz::detail::format_double(b) << "  " << c->name
                  << "  lhs=" << format_sci(c->lhs)
                  << "  rhs=" << format_sci(c->rhs) << "  holds="
                  << (c->holds ? "yes" : "no") << "\n";
      }
      std::cout << "note: " << rep.note << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Robust Kaczmarz solvers for sparsely corrupted linear systems"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand(
      "gen", "Generate a benchmark problem and write it to disk");
  gen_cmd->add_option("kind", gen.kind, "Problem family")
      ->check(CLI::IsMember({"gaussian", "tomography"}));
  gen_cmd->add_option("--m", gen.m, "Rows (gaussian)");
  gen_cmd->add_option("--n", gen.n, "Columns (gaussian)");
  gen_cmd->add_option("--grid", gen.grid, "Image side length (tomography)");
  gen_cmd->add_option("--rays", gen.rays, "Ray count (tomography)");
  gen_cmd->add_option("--seed", gen.seed, "Problem seed");
  gen_cmd->add_option("--corruption", gen.corruption, "Corruption model")
      ->check(CLI::IsMember(
          {"none", "uniform", "two_layer", "five_layer", "two_layer_tomo"}));
  gen_cmd->add_option("--beta", gen.beta, "Corrupted-row fraction");
  gen_cmd->add_option("--uniform-lo", gen.uniform_lo,
                      "Uniform model: perturbation lower bound");
  gen_cmd->add_option("--uniform-hi", gen.uniform_hi,
                      "Uniform model: perturbation upper bound");
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory");

  HarnessArgs solve_args, bench_args;
  const auto add_harness_options = [](CLI::App* cmd, HarnessArgs& a) {
    cmd->add_option("--config", a.config_path,
                    "key = value experiment manifest")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", a.sets,
                    "Override one config key (key=value, repeatable)");
    cmd->add_flag("--sequential", a.sequential,
                  "Run trials one after another instead of concurrently");
    cmd->add_option("--trials", a.trials, "Override trial count");
    cmd->add_option("--base-seed", a.base_seed, "Override the base seed");
    cmd->add_option("--out-dir", a.out_dir, "Override the output directory");
    cmd->add_option("--solvers", a.solvers,
                    "Override the solver list (comma-separated)");
    cmd->add_option("--x0", a.x0, "Start iterate: zero or least_squares");
  };
  CLI::App* solve_cmd = app.add_subcommand(
      "solve", "Run the configured solvers and write per-trial traces");
  add_harness_options(solve_cmd, solve_args);
  CLI::App* bench_cmd = app.add_subcommand(
      "bench",
      "Run a multi-trial benchmark with aggregate curves and SVG plots");
  add_harness_options(bench_cmd, bench_args);

  RateArgs rate;
  CLI::App* rate_cmd = app.add_subcommand(
      "rate", "Tabulate the theoretical per-iteration contraction factor");
  rate_cmd->add_option("--beta-min", rate.beta_min, "Grid start");
  rate_cmd->add_option("--beta-max", rate.beta_max, "Grid end");
  rate_cmd->add_option("--points", rate.points, "Grid size");
  rate_cmd->add_option("--alpha", rate.alpha, "Quantile slack alpha");
  rate_cmd->add_option("--n", rate.n, "Solution dimension n");
  rate_cmd->add_option("--m", rate.m, "Row count m (condition check only)");
  rate_cmd->add_option("--c-d", rate.c_d, "Rate constant C_D");
  rate_cmd->add_option("--c-1", rate.c_1, "Sample-complexity constant C_1");
  rate_cmd->add_option("--c-k", rate.c_k, "Subgaussian constant C_K");
  rate_cmd->add_option("--density-bound", rate.d_bound, "Density bound D");
  rate_cmd->add_option("--subg-bound", rate.k_subg, "Subgaussian norm K");
  rate_cmd->add_option("--out", rate.out_csv, "Output CSV path");
  rate_cmd->add_option("--svg", rate.out_svg,
                       "Output SVG path (empty string disables)");
  rate_cmd->add_flag("--check", rate.check,
                     "Also evaluate the theorem's two side conditions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "error: config: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (solve_cmd->parsed()) return cmd_solve(solve_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_args);
    return cmd_rate(rate);
  } catch (const kz::ConfigError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const kz::IoError& e) {
    std::cerr << "error: io: " << one_line(e.what()) << "\n";
    return 4;
  } catch (const kz::Error& e) {
    std::cerr << "error: numeric: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return 3;
  }
}
