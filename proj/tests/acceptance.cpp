// Acceptance gate: one check per release criterion, one [PASS]/[FAIL] line
// each, nonzero exit if anything fails. Statistical checks run at desk scale
// (2000x50, 10 seeds) with pinned seeds and pinned thresholds.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "kaczmarz/bench.hpp"
#include "kaczmarz/linalg.hpp"
#include "kaczmarz/problems.hpp"
#include "kaczmarz/sampling.hpp"
#include "kaczmarz/solvers.hpp"
#include "kaczmarz/theory.hpp"
#include "kaczmarz/trace_io.hpp"
#include "oracles.hpp"

namespace kz = kaczmarz;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool pass,
            const std::string& detail, double seconds) {
  std::printf("[%s] criterion %2d: %s%s%s [%.1fs]\n", pass ? "PASS" : "FAIL",
              idx, name.c_str(), detail.empty() ? "" : " -- ",
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

std::string sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double median(std::vector<double> v) { return kz::lower_quantile(v, 0.5); }

// Shared desk-scale benchmark: Gaussian 2000x50, Uniform corruption at
// beta = 0.2, ten independently seeded trials.
constexpr std::size_t kRows = 2000;
constexpr std::size_t kCols = 50;
constexpr double kBeta = 0.2;
constexpr double kAlpha = 0.05;
constexpr std::size_t kSeeds = 10;
constexpr std::uint64_t kBaseSeed = 424242;

struct Trial {
  kz::CorruptionOutcome outcome;
  kz::Oracle oracle;
  std::uint64_t solver_seed = 0;
};

std::vector<Trial> make_trials() {
  std::vector<Trial> trials;
  trials.reserve(kSeeds);
  for (std::size_t k = 0; k < kSeeds; ++k) {
    const std::uint64_t tseed = kz::derive_seed(kBaseSeed, k);
    kz::GeneratedProblem p =
        kz::gen_gaussian_system(kRows, kCols, kz::derive_seed(tseed, 0));
    kz::CorruptionSpec spec;
    spec.model = kz::CorruptionModel::Uniform;
    spec.beta = kBeta;
    spec.seed = kz::derive_seed(tseed, 1);
    kz::CorruptionOutcome outcome =
        kz::apply_corruption(p.system, p.truth, spec);
    kz::Oracle oracle =
        kz::make_oracle(outcome.truth, outcome.support, kRows);
    trials.push_back(
        {std::move(outcome), std::move(oracle), kz::derive_seed(tseed, 2)});
  }
  return trials;
}

kz::Estimate zero_start() { return kz::Estimate{std::vector<double>(kCols, 0.0)}; }

// ---------------------------------------------------------------------------

void criterion_1() {
  const double t0 = now_seconds();
  kz::TheoryParams p;
  p.c_d = 1.0;
  p.n = 10;
  p.alpha = 0.05;

  p.beta = 0.0;
  const double f0 = kz::convergence_factor(p);
  p.beta = 0.1;
  const double f1 = kz::convergence_factor(p);
  const double want0 = 0.90975;
  const double want1 = 1.0 - std::pow(1.0 - 0.3 - 0.05, 3) / (10.0 * 0.75);
  bool pass = std::abs(f0 - want0) <= 1e-12 && std::abs(f1 - want1) <= 1e-12;

  const std::vector<double> grid{0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
  const auto curve = kz::rate_curve(p, grid);  // throws if not increasing
  for (std::size_t i = 1; i < curve.size(); ++i)
    pass = pass && curve[i].factor > curve[i - 1].factor;

  report(1, "rate formula golden values", pass,
         "f(0)=" + sci(f0) + " f(0.1)=" + sci(f1) + ", curve increasing",
         now_seconds() - t0);
}

void criterion_2() {
  const double t0 = now_seconds();
  kz::RngStream rng(kz::derive_seed(kBaseSeed, 1002));
  bool pass = true;
  std::size_t checked = 0;
  for (std::size_t rep = 0; rep < 500 && pass; ++rep) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.next_below(200));
    std::vector<double> v(len);
    for (double& x : v) x = kz::sample_real_uniform(rng, -100.0, 100.0);
    for (int qi = 1; qi <= 10; ++qi) {
      const double q = qi / 10.0;
      if (kz::lower_quantile(v, q) != oracles::sorted_lower_quantile(v, q)) {
        pass = false;
        break;
      }
      ++checked;
    }
  }
  report(2, "lower quantile equals sort oracle", pass,
         std::to_string(checked) + " exact comparisons",
         now_seconds() - t0);
}

void criterion_3() {
  const double t0 = now_seconds();
  kz::RngStream rng(kz::derive_seed(kBaseSeed, 1003));
  const std::size_t dim = 30;
  bool pass = true;
  double worst_identity = 0.0, worst_residual = 0.0;
  for (std::size_t rep = 0; rep < 1000; ++rep) {
    std::vector<double> a(dim), xstar(dim), x(dim);
    kz::sample_gaussian(rng, a);
    kz::sample_gaussian(rng, xstar);
    kz::sample_gaussian(rng, x);
    double alen = kz::norm(a);
    for (double& c : a) c /= alen;
    const double b = kz::dot(a, xstar);  // puts xstar on the hyperplane

    const double r = kz::dot(a, x) - b;
    const kz::Estimate xp = kz::rk_step(kz::Estimate{x}, a, b);

    double d_before = 0.0, d_after = 0.0, xnorm2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      d_before += (x[j] - xstar[j]) * (x[j] - xstar[j]);
      d_after += (xp.x[j] - xstar[j]) * (xp.x[j] - xstar[j]);
      xnorm2 += x[j] * x[j];
    }
    const double identity_err = std::abs(d_after - (d_before - r * r));
    const double post_residual = std::abs(kz::dot(a, xp.x) - b);
    worst_identity = std::max(worst_identity,
                              identity_err / (1.0 + xnorm2));
    worst_residual = std::max(worst_residual, post_residual);
    if (identity_err > 1e-10 * (1.0 + xnorm2) || post_residual > 1e-12)
      pass = false;
  }
  report(3, "projection Pythagorean identity", pass,
         "worst scaled identity err " + sci(worst_identity) +
             ", worst post-step residual " + sci(worst_residual),
         now_seconds() - t0);
}

// Criterion 4 state reused by criterion 8.
struct C4Output {
  std::vector<kz::RunTrace> qrk_traces;  // with stride-100 checkpoints
};

C4Output criterion_4(const std::vector<Trial>& trials) {
  const double t0 = now_seconds();
  C4Output out;
  std::vector<double> qrk_finals, rk_finals;
  for (const Trial& trial : trials) {
    kz::QrkConfig qc;
    qc.q = 1.0 - kBeta - kAlpha;  // 0.75
    qc.t = kRows;                 // full batch
    qc.iterations = 5000;
    qc.seed = trial.solver_seed;
    qc.checkpoint_stride = 100;
    const std::vector<std::size_t> pool = kz::detail::identity_pool(kRows);
    kz::RunTrace qt = kz::qrk_solve(trial.outcome.system, qc, pool,
                                    zero_start(), &trial.oracle);
    qrk_finals.push_back(qt.points.back().rel_error.value());
    out.qrk_traces.push_back(std::move(qt));

    kz::RkConfig rc;
    rc.iterations = 5000;
    rc.seed = trial.solver_seed;
    const kz::RunTrace rt =
        kz::rk_solve(trial.outcome.system, rc, zero_start(), &trial.oracle);
    rk_finals.push_back(rt.points.back().rel_error.value());
  }
  const double med_qrk = median(qrk_finals);
  const double med_rk = median(rk_finals);
  const bool pass = med_qrk <= 1e-4 && med_rk >= 1e-1;
  report(4, "QRK converges where RK fails", pass,
         "median qrk=" + sci(med_qrk) + " (need <=1e-4), rk=" + sci(med_rk) +
             " (need >=1e-1)",
         now_seconds() - t0);
  return out;
}

// Criterion 5 state reused by criterion 6.
struct C5Output {
  std::vector<double> wl_sub_finals;  // WL-QRK at t = 0.4 m
};

C5Output criterion_5(const std::vector<Trial>& trials) {
  const double t0 = now_seconds();
  C5Output out;
  const std::size_t t_sub = static_cast<std::size_t>(0.4 * kRows);  // 800
  const std::size_t n1 = 100, n2 = 4000, s_cycle = 100;

  std::size_t error_wins = 0, frac_wins = 0;
  for (const Trial& trial : trials) {
    kz::SolverConfig wc;
    wc.beta_bound = kBeta;
    wc.alpha = kAlpha;
    wc.t = t_sub;
    wc.n1 = n1;
    wc.n2 = n2;
    wc.s_cycle = s_cycle;
    wc.seed = trial.solver_seed;
    const kz::RunTrace wt =
        kz::wlqrk_solve(trial.outcome.system, wc, zero_start(), &trial.oracle);
    const double wl_final = wt.points.back().rel_error.value();
    const double wl_frac = wt.points.back().wl_corruption_frac.value();
    out.wl_sub_finals.push_back(wl_final);

    kz::QrkConfig qc;
    qc.q = wc.q0();  // equal target quantile
    qc.t = t_sub;    // equal per-iteration work
    qc.iterations = n1 + n2;
    qc.seed = trial.solver_seed;
    const std::vector<std::size_t> pool = kz::detail::identity_pool(kRows);
    const kz::RunTrace qt = kz::qrk_solve(trial.outcome.system, qc, pool,
                                          zero_start(), &trial.oracle);
    const double qrk_final = qt.points.back().rel_error.value();

    if (wl_final <= qrk_final) ++error_wins;
    if (wl_frac < kBeta) ++frac_wins;
  }
  const bool pass = error_wins >= 8 && frac_wins >= 9;
  report(5, "WL-QRK improves on QRK at equal budget", pass,
         "error wins " + std::to_string(error_wins) +
             "/10 (need >=8), whitelist-cleaner wins " +
             std::to_string(frac_wins) + "/10 (need >=9)",
         now_seconds() - t0);
  return out;
}

void criterion_6(const std::vector<Trial>& trials, const C5Output& c5) {
  const double t0 = now_seconds();
  std::vector<double> full_finals;
  for (const Trial& trial : trials) {
    kz::SolverConfig wc;
    wc.beta_bound = kBeta;
    wc.alpha = kAlpha;
    wc.t = kRows;  // full batch
    wc.n1 = 100;
    wc.n2 = 4000;
    wc.s_cycle = 100;
    wc.seed = trial.solver_seed;
    const kz::RunTrace wt =
        kz::wlqrk_solve(trial.outcome.system, wc, zero_start(), &trial.oracle);
    full_finals.push_back(wt.points.back().rel_error.value());
  }
  const double med_sub = median(c5.wl_sub_finals);
  const double med_full = median(full_finals);
  const bool pass = med_sub <= 10.0 * med_full;
  report(6, "subsampled WL-QRK within one decade of full batch", pass,
         "median t=0.4m " + sci(med_sub) + " vs t=m " + sci(med_full),
         now_seconds() - t0);
}

void criterion_7() {
  const double t0 = now_seconds();
  // Small system keeps the stride-1 snapshots cheap.
  const std::size_t m = 400, n = 20, n1 = 60;
  kz::GeneratedProblem p =
      kz::gen_gaussian_system(m, n, kz::derive_seed(kBaseSeed, 1007));
  kz::CorruptionSpec spec;
  spec.model = kz::CorruptionModel::Uniform;
  spec.beta = 0.1;
  spec.seed = kz::derive_seed(kBaseSeed, 1008);
  const kz::CorruptionOutcome outcome =
      kz::apply_corruption(p.system, p.truth, spec);

  kz::SolverConfig wc;
  wc.beta_bound = 0.1;
  wc.alpha = kAlpha;
  wc.t = 160;
  wc.n1 = n1;
  wc.n2 = 40;
  wc.s_cycle = 20;
  wc.seed = kz::derive_seed(kBaseSeed, 1009);
  wc.checkpoint_stride = 1;

  kz::QrkConfig qc;
  qc.q = wc.q0();
  qc.t = wc.t;
  qc.iterations = wc.n1 + wc.n2;
  qc.seed = wc.seed;
  qc.checkpoint_stride = 1;

  const kz::Estimate x0{std::vector<double>(n, 0.0)};
  const kz::RunTrace wt = kz::wlqrk_solve(outcome.system, wc, x0);
  const std::vector<std::size_t> pool = kz::detail::identity_pool(m);
  const kz::RunTrace qt = kz::qrk_solve(outcome.system, qc, pool, x0);

  bool pass = wt.checkpoints.size() > n1 && qt.checkpoints.size() > n1;
  std::size_t matched = 0;
  for (std::size_t j = 0; pass && j <= n1; ++j) {
    const auto& wx = wt.checkpoints[j];
    const auto& qx = qt.checkpoints[j];
    pass = wx.iteration == j && qx.iteration == j &&
           std::memcmp(wx.x.data(), qx.x.data(), n * sizeof(double)) == 0;
    if (pass) ++matched;
  }
  report(7, "warm-up iterates match QRK bit-for-bit", pass,
         std::to_string(matched) + "/" + std::to_string(n1 + 1) +
             " snapshots identical",
         now_seconds() - t0);
}

void criterion_8(const std::vector<Trial>& trials, const C4Output& c4) {
  const double t0 = now_seconds();
  const std::size_t s = 50;
  std::size_t qualifying = 0, hits = 0;
  bool ran = true;
  std::string note;
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const kz::DetectorReport rep =
        kz::detector_report(trials[k].outcome, c4.qrk_traces[k], s, 0.1);
    if (!rep.first_small_error_iteration.has_value()) {
      ran = false;
      note = "seed " + std::to_string(k) + " never reached ||e|| < eps_s/2";
      break;
    }
    const std::size_t small_from = *rep.first_small_error_iteration;
    for (std::size_t idx = 0; idx < rep.checked_iterations.size(); ++idx) {
      if (rep.checked_iterations[idx] < small_from) continue;
      ++qualifying;
    }
    for (std::size_t it : rep.hit_iterations)
      if (it >= small_from) ++hits;
  }
  const double rate =
      qualifying == 0 ? 0.0
                      : static_cast<double>(hits) /
                            static_cast<double>(qualifying);
  const bool pass = ran && qualifying > 0 && rate >= 0.9;
  report(8, "top-s residuals screen the corrupted support", pass,
         ran ? std::to_string(hits) + "/" + std::to_string(qualifying) +
                   " qualifying checkpoints hit (need >=90%)"
             : note,
         now_seconds() - t0);
}

void criterion_9() {
  const double t0 = now_seconds();
  // The per-mutation checks and per-cycle audits ran in every solver call
  // above (any violation throws). Here the partition is additionally
  // stress-tested directly with random move/audit interleavings.
  bool pass = true;
  std::string note = "20000 random mutations audited";
  try {
    const std::size_t m = 500;
    kz::WhitelistState state(m, 0.75, 0.05, 0.95);
    kz::RngStream rng(kz::derive_seed(kBaseSeed, 1010));
    for (std::size_t op = 0; op < 20000; ++op) {
      const auto i = static_cast<std::size_t>(rng.next_below(m));
      if (state.in_whitelist(i)) {
        state.note_sample(i);
        if (rng.next_below(2) == 0) state.note_block(i);
        if (rng.next_below(4) == 0 && state.whitelist().size() > 1)
          state.move_to_blocklist(i);
      } else {
        state.move_to_whitelist(i);
      }
      if (op % 100 == 0) state.check_partition();
    }
    state.check_partition();
    if (state.whitelist().size() + state.blocklist().size() != m)
      pass = false;
  } catch (const kz::Error& e) {
    pass = false;
    note = e.what();
  }
  report(9, "whitelist/blocklist partition invariant", pass, note,
         now_seconds() - t0);
}

void criterion_10() {
  const double t0 = now_seconds();
  kz::ExperimentConfig cfg;
  cfg.problem = kz::ProblemKind::Gaussian;
  cfg.m = 500;
  cfg.n = 16;
  cfg.corruption = kz::CorruptionModel::TwoLayer;
  cfg.beta = 0.15;
  cfg.solvers = {"rk", "qrk", "wlqrk"};
  cfg.t = 250;
  cfg.n1 = 50;
  cfg.n2 = 250;
  cfg.s_cycle = 50;
  cfg.trials = 4;
  cfg.base_seed = 20240821;
  cfg.validate();

  const auto runs_par = kz::run_trials(cfg, /*concurrent=*/true);
  const auto runs_seq = kz::run_trials(cfg, /*concurrent=*/false);
  const auto runs_rep = kz::run_trials(cfg, /*concurrent=*/true);

  // Serialize each run and compare the bytes with the wall-time column
  // stripped from every data line.
  const auto strip_wall = [](const std::string& csv) {
    std::string out;
    std::size_t pos = 0;
    bool header = true;
    while (pos < csv.size()) {
      std::size_t end = csv.find('\n', pos);
      if (end == std::string::npos) end = csv.size();
      const std::string line = csv.substr(pos, end - pos);
      if (header) {
        out += line;
        header = false;
      } else {
        out += line.substr(0, line.rfind(','));
      }
      out += '\n';
      pos = end + 1;
    }
    return out;
  };
  const auto serialize = [&](const std::vector<kz::SolverRun>& runs) {
    const std::string tmp =
        (std::filesystem::temp_directory_path() / "kz_acceptance_trace.csv")
            .string();
    std::string all;
    for (const kz::SolverRun& run : runs) {
      kz::write_trace_csv(tmp, run.trace);
      std::ifstream in(tmp, std::ios::binary);
      all += strip_wall(std::string(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()));
    }
    std::filesystem::remove(tmp);
    return all;
  };

  const std::string par = serialize(runs_par);
  const std::string seq = serialize(runs_seq);
  const std::string rep = serialize(runs_rep);
  const bool pass = !par.empty() && par == seq && par == rep;
  report(10, "byte-identical traces across reruns and concurrency", pass,
         std::to_string(runs_par.size()) + " runs x " +
             std::to_string(cfg.total_iterations() + 1) + " records compared",
         now_seconds() - t0);
}

}  // namespace

int main() {
  std::printf("acceptance gate: %zu-seed statistical checks at %zux%zu\n",
              kSeeds, kRows, kCols);
  criterion_1();
  criterion_2();
  criterion_3();
  const std::vector<Trial> trials = make_trials();
  const C4Output c4 = criterion_4(trials);
  const C5Output c5 = criterion_5(trials);
  criterion_6(trials, c5);
  criterion_7();
  criterion_8(trials, c4);
  criterion_9();
  criterion_10();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
