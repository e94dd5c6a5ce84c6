#pragma once

// Experiment harness shared by the CLI: a flat key=value config format,
// per-trial seed derivation, concurrent trial execution, and median/IQR
// aggregation of traces. Trials are independent; each owns its problem,
// corruption, solver state, and RNG streams, so concurrent and sequential
// execution produce identical traces.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/problems.hpp"
#include "kaczmarz/sampling.hpp"
#include "kaczmarz/solvers.hpp"
#include "kaczmarz/svg.hpp"
#include "kaczmarz/trace_io.hpp"

namespace kaczmarz {

enum class ProblemKind { Gaussian, Tomography, Csv };
enum class StartKind { Zero, LeastSquares };

struct ExperimentConfig {
  // Problem.
  ProblemKind problem = ProblemKind::Gaussian;
  std::size_t m = 2000;
  std::size_t n = 50;
  std::size_t grid = 16;     // tomography pixels per side
  std::size_t rays = 1300;   // tomography rows
  std::string csv_path;
  bool csv_header = false;
  bool make_consistent = true;

  // Corruption. "none" is encoded as an absent model.
  std::optional<CorruptionModel> corruption;
  double beta = 0.0;
  double uniform_lo = 0.0;  // optional range override for the Uniform model
  double uniform_hi = 0.0;

  // Solvers and their parameters.
  std::vector<std::string> solvers{"wlqrk"};
  double beta_bound = -1.0;  // < 0: use the corruption beta
  double alpha = 0.05;
  std::size_t t = 0;  // 0: full batch (t = m)
  std::size_t n1 = 100;
  std::size_t n2 = 1000;
  std::size_t s_cycle = 100;
  double thr = 0.0;
  double block_vote_ratio = 0.9;
  double q_min = 0.05;
  double q = 0.0;  // QRK quantile; 0: 1 - alpha - beta_bound
  StartKind x0 = StartKind::Zero;
  std::size_t checkpoint_stride = 0;

  // Harness.
  std::size_t trials = 1;
  std::uint64_t base_seed = 1;
  bool regenerate_per_trial = true;  // fresh problem + corruption per trial
  std::uint64_t problem_seed = 1;     // used when regenerate_per_trial = off
  std::uint64_t corruption_seed = 1;  // used when regenerate_per_trial = off
  std::string out_dir = "out";

  double effective_beta_bound() const {
    return beta_bound < 0.0 ? beta : beta_bound;
  }
  std::size_t effective_t(std::size_t rows) const { return t == 0 ? rows : t; }
  double effective_q() const {
    return q == 0.0 ? 1.0 - alpha - effective_beta_bound() : q;
  }
  std::size_t total_iterations() const { return n1 + n2; }

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be at least 1");
    if (solvers.empty()) throw ConfigError("no solver selected");
    for (const auto& s : solvers)
      if (s != "rk" && s != "qrk" && s != "wlqrk")
        throw ConfigError("unknown solver '" + s +
                          "' (expected rk, qrk, or wlqrk)");
    if (problem == ProblemKind::Csv) {
      if (csv_path.empty()) throw ConfigError("csv_path is required");
      if (!std::filesystem::exists(csv_path))
        throw ConfigError("csv_path '" + csv_path + "' does not exist");
      if (corruption.has_value() && !make_consistent)
        throw ConfigError(
            "corrupting a csv problem requires make_consistent = on "
            "(corruption needs an exactly consistent clean system)");
    }
    if (beta < 0.0 || beta >= 1.0)
      throw ConfigError("beta must lie in [0, 1)");
    if (corruption.has_value() && *corruption == CorruptionModel::Uniform &&
        (uniform_lo != 0.0 || uniform_hi != 0.0) &&
        !(uniform_lo < uniform_hi))
      throw ConfigError("uniform_lo must be below uniform_hi");
    // Solver-parameter sanity lives in the per-solver configs; build one of
    // each requested kind against a representative row count to fail early.
    if (std::find(solvers.begin(), solvers.end(), "wlqrk") != solvers.end()) {
      SolverConfig probe;
      probe.beta_bound = effective_beta_bound();
      probe.alpha = alpha;
      probe.t = 1;  // t depends on m; checked at run time
      probe.n1 = n1;
      probe.n2 = n2;
      probe.s_cycle = s_cycle;
      probe.thr = thr;
      probe.block_vote_ratio = block_vote_ratio;
      probe.q_min = q_min;
      probe.validate();
    }
    if (std::find(solvers.begin(), solvers.end(), "qrk") != solvers.end()) {
      const double qq = effective_q();
      if (!(qq > 0.0) || qq > 1.0)
        throw ConfigError("qrk quantile q = " + std::to_string(qq) +
                          " must lie in (0, 1]");
    }
  }
};

// ---------------------------------------------------------------------------
// Config file parsing: `key = value` lines, # comments, flags override file.

namespace detail {

inline std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
}

inline double parse_real(const std::string& v, const std::string& key) {
  try {
    return parse_csv_field(v, 0);
  } catch (const IoError&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& v, const std::string& key) {
  const double d = parse_real(v, key);
  if (d < 0.0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
    throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" +
                      v + "'");
  return static_cast<std::uint64_t>(d);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> items;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace detail

// Applies one typed key. Both the config-file parser and the CLI flag layer
// funnel through here, so types and diagnostics stay in one place.
inline void set_config_key(ExperimentConfig& cfg, const std::string& key,
                           const std::string& value) {
  using detail::parse_bool;
  using detail::parse_real;
  using detail::parse_uint;
  if (key == "problem") {
    if (value == "gaussian") cfg.problem = ProblemKind::Gaussian;
    else if (value == "tomography") cfg.problem = ProblemKind::Tomography;
    else if (value == "csv") cfg.problem = ProblemKind::Csv;
    else throw ConfigError("unknown problem kind '" + value + "'");
  } else if (key == "m") {
    cfg.m = parse_uint(value, key);
  } else if (key == "n") {
    cfg.n = parse_uint(value, key);
  } else if (key == "grid") {
    cfg.grid = parse_uint(value, key);
  } else if (key == "rays") {
    cfg.rays = parse_uint(value, key);
  } else if (key == "csv_path") {
    cfg.csv_path = value;
  } else if (key == "csv_header") {
    cfg.csv_header = parse_bool(value, key);
  } else if (key == "make_consistent") {
    cfg.make_consistent = parse_bool(value, key);
  } else if (key == "corruption") {
    if (value == "none") cfg.corruption.reset();
    else if (value == "two_layer") cfg.corruption = CorruptionModel::TwoLayer;
    else if (value == "five_layer") cfg.corruption = CorruptionModel::FiveLayer;
    else if (value == "uniform") cfg.corruption = CorruptionModel::Uniform;
    else if (value == "two_layer_tomo")
      cfg.corruption = CorruptionModel::TwoLayerTomo;
    else throw ConfigError("unknown corruption model '" + value + "'");
  } else if (key == "beta") {
    cfg.beta = parse_real(value, key);
  } else if (key == "uniform_lo") {
    cfg.uniform_lo = parse_real(value, key);
  } else if (key == "uniform_hi") {
    cfg.uniform_hi = parse_real(value, key);
  } else if (key == "solvers") {
    cfg.solvers = detail::split_list(value);
  } else if (key == "beta_bound") {
    cfg.beta_bound = parse_real(value, key);
  } else if (key == "alpha") {
    cfg.alpha = parse_real(value, key);
  } else if (key == "t") {
    cfg.t = parse_uint(value, key);
  } else if (key == "n1") {
    cfg.n1 = parse_uint(value, key);
  } else if (key == "n2") {
    cfg.n2 = parse_uint(value, key);
  } else if (key == "s_cycle") {
    cfg.s_cycle = parse_uint(value, key);
  } else if (key == "thr") {
    cfg.thr = parse_real(value, key);
  } else if (key == "block_vote_ratio") {
    cfg.block_vote_ratio = parse_real(value, key);
  } else if (key == "q_min") {
    cfg.q_min = parse_real(value, key);
  } else if (key == "q") {
    cfg.q = parse_real(value, key);
  } else if (key == "x0") {
    if (value == "zero") cfg.x0 = StartKind::Zero;
    else if (value == "least_squares") cfg.x0 = StartKind::LeastSquares;
    else throw ConfigError("x0 must be 'zero' or 'least_squares'");
  } else if (key == "checkpoint_stride") {
    cfg.checkpoint_stride = parse_uint(value, key);
  } else if (key == "trials") {
    cfg.trials = parse_uint(value, key);
  } else if (key == "base_seed") {
    cfg.base_seed = parse_uint(value, key);
  } else if (key == "regenerate_per_trial") {
    cfg.regenerate_per_trial = parse_bool(value, key);
  } else if (key == "problem_seed") {
    cfg.problem_seed = parse_uint(value, key);
  } else if (key == "corruption_seed") {
    cfg.corruption_seed = parse_uint(value, key);
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_config_key(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Trial execution

struct TrialData {
  CorruptionOutcome outcome;  // support empty when corruption = none
  std::optional<Oracle> oracle;
  Estimate start;
};

struct SolverRun {
  std::string solver;
  std::size_t trial = 0;
  RunTrace trace;
};

namespace detail {

inline CorruptionOutcome uncorrupted_outcome(LinearSystem sys,
                                             std::vector<double> truth) {
  std::vector<double> labels(sys.labels().begin(), sys.labels().end());
  return {std::move(sys), std::move(labels), std::move(truth), {}};
}

}  // namespace detail

// Seeds: every trial derives one master seed from (base_seed, trial); the
// problem, corruption, and solver streams split off that. With
// regenerate_per_trial = off, problem and corruption come from the pinned
// config seeds and only the solver stream varies by trial.
inline TrialData prepare_trial(const ExperimentConfig& cfg,
                               std::size_t trial) {
  const std::uint64_t trial_seed = derive_seed(cfg.base_seed, trial);
  const std::uint64_t problem_seed =
      cfg.regenerate_per_trial ? derive_seed(trial_seed, 0) : cfg.problem_seed;
  const std::uint64_t corruption_seed = cfg.regenerate_per_trial
                                            ? derive_seed(trial_seed, 1)
                                            : cfg.corruption_seed;

  std::optional<std::vector<double>> truth;
  std::optional<LinearSystem> sys;
  switch (cfg.problem) {
    case ProblemKind::Gaussian: {
      GeneratedProblem p = gen_gaussian_system(cfg.m, cfg.n, problem_seed);
      sys = std::move(p.system);
      truth = std::move(p.truth);
      break;
    }
    case ProblemKind::Tomography: {
      GeneratedProblem p =
          gen_tomography_system(cfg.grid, cfg.rays, problem_seed);
      sys = std::move(p.system);
      truth = std::move(p.truth);
      break;
    }
    case ProblemKind::Csv: {
      LoadedProblem p =
          load_csv_system(cfg.csv_path, cfg.make_consistent, cfg.csv_header);
      sys = std::move(p.system);
      truth = std::move(p.truth);
      break;
    }
  }

  TrialData data{detail::uncorrupted_outcome(
                     std::move(*sys), truth.value_or(std::vector<double>())),
                 std::nullopt,
                 Estimate{}};
  if (cfg.corruption.has_value()) {
    if (!truth.has_value())
      throw ConfigError("corruption requires a ground-truth solution");
    CorruptionSpec spec;
    spec.model = *cfg.corruption;
    spec.beta = cfg.beta;
    spec.seed = corruption_seed;
    if (*cfg.corruption == CorruptionModel::Uniform &&
        (cfg.uniform_lo != 0.0 || cfg.uniform_hi != 0.0)) {
      const auto budget = static_cast<std::size_t>(std::floor(
          cfg.beta * static_cast<double>(data.outcome.system.rows())));
      spec.layers = {{cfg.uniform_lo, cfg.uniform_hi, budget}};
    }
    data.outcome = apply_corruption(data.outcome.system, *truth, spec);
  }

  if (!data.outcome.truth.empty())
    data.oracle = make_oracle(data.outcome.truth, data.outcome.support,
                              data.outcome.system.rows());

  data.start = cfg.x0 == StartKind::LeastSquares
                   ? least_squares(data.outcome.system)
                   : Estimate{std::vector<double>(
                         data.outcome.system.cols(), 0.0)};
  return data;
}

// Runs every configured solver on one trial's data, sharing the trial's
// derived solver seed so comparisons are paired.
inline std::vector<SolverRun> run_single_trial(const ExperimentConfig& cfg,
                                               std::size_t trial) {
  const TrialData data = prepare_trial(cfg, trial);
  const std::uint64_t solver_seed =
      derive_seed(derive_seed(cfg.base_seed, trial), 2);
  const LinearSystem& sys = data.outcome.system;
  const Oracle* oracle = data.oracle ? &*data.oracle : nullptr;

  std::vector<SolverRun> runs;
  for (const std::string& name : cfg.solvers) {
    RunTrace trace;
    if (name == "rk") {
      RkConfig rk;
      rk.iterations = cfg.total_iterations();
      rk.seed = solver_seed;
      rk.checkpoint_stride = cfg.checkpoint_stride;
      trace = rk_solve(sys, rk, data.start, oracle);
    } else if (name == "qrk") {
      QrkConfig qc;
      qc.q = cfg.effective_q();
      qc.t = cfg.effective_t(sys.rows());
      qc.iterations = cfg.total_iterations();
      qc.seed = solver_seed;
      qc.checkpoint_stride = cfg.checkpoint_stride;
      if (qc.q * static_cast<double>(qc.t) < 1.0)
        std::cerr << "warning: q*t = " << qc.q * static_cast<double>(qc.t)
                  << " < 1; the admissible set is a single order statistic\n";
      const std::vector<std::size_t> pool =
          detail::identity_pool(sys.rows());
      trace = qrk_solve(sys, qc, pool, data.start, oracle);
    } else {  // wlqrk (validated upstream)
      SolverConfig wc;
      wc.beta_bound = cfg.effective_beta_bound();
      wc.alpha = cfg.alpha;
      wc.t = cfg.effective_t(sys.rows());
      wc.n1 = cfg.n1;
      wc.n2 = cfg.n2;
      wc.s_cycle = cfg.s_cycle;
      wc.thr = cfg.thr;
      wc.block_vote_ratio = cfg.block_vote_ratio;
      wc.q_min = cfg.q_min;
      wc.seed = solver_seed;
      wc.checkpoint_stride = cfg.checkpoint_stride;
      trace = wlqrk_solve(sys, wc, data.start, oracle);
    }
    runs.push_back({name, trial, std::move(trace)});
  }
  return runs;
}

// All trials; concurrent execution shares only the immutable config, and
// results are collected in trial order, so the output is identical to a
// sequential run.
inline std::vector<SolverRun> run_trials(const ExperimentConfig& cfg,
                                         bool concurrent) {
  std::vector<SolverRun> all;
  if (concurrent && cfg.trials > 1) {
    std::vector<std::future<std::vector<SolverRun>>> futures;
    futures.reserve(cfg.trials);
    for (std::size_t k = 0; k < cfg.trials; ++k)
      futures.push_back(std::async(std::launch::async, run_single_trial,
                                   std::cref(cfg), k));
    for (auto& f : futures)
      for (auto& run : f.get()) all.push_back(std::move(run));
  } else {
    for (std::size_t k = 0; k < cfg.trials; ++k)
      for (auto& run : run_single_trial(cfg, k)) all.push_back(std::move(run));
  }
  return all;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateCurve {
  std::string solver;
  std::vector<std::size_t> iterations;
  std::vector<double> median_error, q25_error, q75_error;  // empty w/o oracle
  std::vector<double> median_frac;                         // ditto
};

// Median and quartiles across trials at every iteration, per solver.
// Requires at least two trials to be meaningful.
inline AggregateCurve aggregate_runs(const std::vector<SolverRun>& runs,
                                     const std::string& solver) {
  std::vector<const RunTrace*> traces;
  for (const auto& r : runs)
    if (r.solver == solver) traces.push_back(&r.trace);
  if (traces.size() < 2)
    throw AggregationError("aggregation needs at least 2 trials of '" +
                           solver + "'; use the solve command for single runs");
  const std::size_t len = traces[0]->points.size();
  for (const auto* t : traces)
    if (t->points.size() != len)
      throw AggregationError("trials of '" + solver +
                             "' have mismatched trace lengths");

  AggregateCurve curve;
  curve.solver = solver;
  curve.iterations.reserve(len);
  const bool with_oracle = traces[0]->points[0].rel_error.has_value();
  std::vector<double> errs(traces.size()), fracs(traces.size());
  for (std::size_t i = 0; i < len; ++i) {
    curve.iterations.push_back(traces[0]->points[i].iteration);
    if (!with_oracle) continue;
    for (std::size_t k = 0; k < traces.size(); ++k) {
      errs[k] = traces[k]->points[i].rel_error.value();
      fracs[k] = traces[k]->points[i].wl_corruption_frac.value();
    }
    curve.median_error.push_back(lower_quantile(errs, 0.5));
    curve.q25_error.push_back(lower_quantile(errs, 0.25));
    curve.q75_error.push_back(lower_quantile(errs, 0.75));
    curve.median_frac.push_back(lower_quantile(fracs, 0.5));
  }
  return curve;
}

inline std::optional<double> median_final_error(
    const std::vector<SolverRun>& runs, const std::string& solver) {
  std::vector<double> finals;
  for (const auto& r : runs)
    if (r.solver == solver && r.trace.points.back().rel_error.has_value())
      finals.push_back(*r.trace.points.back().rel_error);
  if (finals.empty()) return std::nullopt;
  return lower_quantile(finals, 0.5);
}

}  // namespace kaczmarz
