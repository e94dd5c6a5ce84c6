#pragma once

// Closed-form evaluators for the QRK convergence guarantee and an empirical
// verifier for the residual-screening property: persistently large residuals
// concentrate on corrupted equations once the iterate error falls below half
// the s-th largest corruption magnitude.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/linalg.hpp"
#include "kaczmarz/problems.hpp"
#include "kaczmarz/solvers.hpp"

namespace kaczmarz {

// Constants appearing in the convergence guarantee. Nothing pins them down
// numerically, so they are user parameters defaulting to 1; evaluations are
// calculators, not certificates.
struct TheoryParams {
  double c_d = 1.0;     // rate constant C_D
  double c_1 = 1.0;     // sample-complexity constant C_1
  double c_k = 1.0;     // subgaussian constant C_K
  double d_bound = 1.0; // density bound D
  double k_subg = 1.0;  // subgaussian norm bound K
  std::size_t n = 1;
  std::size_t m = 1;
  double alpha = 0.05;
  double beta = 0.0;
};

namespace detail {

inline void require_valid_regime(const TheoryParams& p) {
  if (p.c_d <= 0.0 || p.c_1 <= 0.0 || p.c_k <= 0.0 || p.d_bound <= 0.0 ||
      p.k_subg <= 0.0)
    throw ConfigError("theory constants must be positive");
  if (p.n < 1 || p.m < 1) throw ConfigError("dimensions must be positive");
  if (!(p.alpha > 0.0) || p.beta < 0.0)
    throw ConfigError("need alpha > 0 and beta >= 0");
  const double g3 = 1.0 - 3.0 * p.beta - p.alpha;
  const double g2 = 1.0 - 2.0 * p.beta - p.alpha;
  if (!(g3 > 0.0))
    throw RegimeViolation("1 - 3*beta - alpha = " + std::to_string(g3) +
                          " must be positive (beta = " + std::to_string(p.beta) +
                          ")");
  if (!(g2 > 0.0))
    throw RegimeViolation("1 - 2*beta - alpha must be positive");
}

}  // namespace detail

// Per-iteration expected contraction factor of full-residual QRK:
// 1 - C_D (1-3b-a)^3 / (n (1-2b-a)).
inline double convergence_factor(const TheoryParams& p) {
  detail::require_valid_regime(p);
  const double g3 = 1.0 - 3.0 * p.beta - p.alpha;
  const double g2 = 1.0 - 2.0 * p.beta - p.alpha;
  return 1.0 - p.c_d * g3 * g3 * g3 / (static_cast<double>(p.n) * g2);
}

struct TheoremCondition {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct ConditionReport {
  TheoremCondition aspect_ratio;      // m/n > C1/(1-3b-a) * log(DK/(1-3b-a))
  TheoremCondition corruption_level;  // 4CK^2 sqrt(b)/a + 2CK^2 b/a^2 < bound
  bool all_hold = false;
  // Reminder attached to every report: with unspecified constants this is
  // arithmetic on user inputs, not a proof that the guarantee applies.
  std::string note =
      "calculator with user-supplied constants, not a certificate";
};

inline ConditionReport check_theorem_conditions(const TheoryParams& p) {
  detail::require_valid_regime(p);
  const double g3 = 1.0 - 3.0 * p.beta - p.alpha;
  const double g2 = 1.0 - 2.0 * p.beta - p.alpha;
  ConditionReport rep;
  rep.aspect_ratio.name = "m/n > C1/(1-3b-a) * log(D*K/(1-3b-a))";
  rep.aspect_ratio.lhs =
      static_cast<double>(p.m) / static_cast<double>(p.n);
  rep.aspect_ratio.rhs =
      p.c_1 / g3 * std::log(p.d_bound * p.k_subg / g3);
  rep.aspect_ratio.holds = rep.aspect_ratio.lhs > rep.aspect_ratio.rhs;

  rep.corruption_level.name =
      "4CK^2 sqrt(b)/a + 2CK^2 b/a^2 < C_D(1-3b-a)^4/(1-2b-a)";
  rep.corruption_level.lhs =
      4.0 * p.c_k * p.c_k * std::sqrt(p.beta) / p.alpha +
      2.0 * p.c_k * p.c_k * p.beta / (p.alpha * p.alpha);
  rep.corruption_level.rhs = p.c_d * g3 * g3 * g3 * g3 / g2;
  rep.corruption_level.holds =
      rep.corruption_level.lhs < rep.corruption_level.rhs;

  rep.all_hold = rep.aspect_ratio.holds && rep.corruption_level.holds;
  return rep;
}

struct RatePoint {
  double beta = 0.0;
  double factor = 0.0;
};

// Tabulates the contraction factor over a beta grid; the closed form is
// strictly increasing in beta on any valid grid, and the table asserts it.
inline std::vector<RatePoint> rate_curve(TheoryParams params,
                                         const std::vector<double>& betas) {
  if (betas.empty()) throw EmptyInput("rate_curve needs at least one beta");
  std::vector<RatePoint> out;
  out.reserve(betas.size());
  for (double b : betas) {
    params.beta = b;
    out.push_back({b, convergence_factor(params)});
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].beta <= out[i - 1].beta)
      throw ConfigError("beta grid must be strictly increasing");
    if (out[i].factor <= out[i - 1].factor)
      throw InvariantViolation("contraction factor failed to increase in beta");
  }
  return out;
}

// The s-th largest absolute corruption magnitude, taken from the realized
// label perturbations (corrupted minus clean labels on the support).
inline double epsilon_order_statistic(const CorruptionOutcome& outcome,
                                      std::size_t s) {
  const std::size_t k = outcome.support.size();
  if (s < 1 || s > k)
    throw IndexOutOfRange("s must lie in [1, |support|] = [1, " +
                          std::to_string(k) + "], got " + std::to_string(s));
  std::vector<double> mags;
  mags.reserve(k);
  for (std::size_t i : outcome.support)
    mags.push_back(
        std::abs(outcome.system.label(i) - outcome.clean_labels[i]));
  std::nth_element(mags.begin(), mags.begin() + (s - 1), mags.end(),
                   std::greater<>());
  return mags[s - 1];
}

struct DetectorReport {
  std::size_t s = 0;
  double epsilon_s = 0.0;  // s-th largest |corruption|
  double eta = 0.0;        // target failure probability (reporting only)
  std::vector<std::size_t> checked_iterations;  // checkpoint iterations
  std::vector<std::size_t> hit_iterations;      // top-s all corrupted here
  // Earliest checkpoint after which every later checkpoint was a hit.
  std::optional<std::size_t> first_stable_iteration;
  // First checkpoint with ||x_j - x*|| < epsilon_s / 2 (the sufficient
  // condition for exact top-s screening).
  std::optional<std::size_t> first_small_error_iteration;
};

// Replays a solver run's iterate snapshots against the corrupted system:
// at each checkpoint, do the s largest |residuals| all point at corrupted
// rows? Needs the ground truth, so the run must have been traced with an
// oracle-producing corruption outcome.
inline DetectorReport detector_report(const CorruptionOutcome& outcome,
                                      const RunTrace& trace, std::size_t s,
                                      double eta) {
  if (outcome.truth.empty())
    throw OracleMissing("detector needs the ground-truth solution");
  if (!(eta > 0.0) || eta >= 1.0)
    throw ConfigError("eta must lie in (0, 1)");
  if (trace.checkpoints.empty())
    throw ConfigError("trace has no iterate snapshots; rerun the solver "
                      "with a checkpoint stride");
  const LinearSystem& sys = outcome.system;
  const std::size_t m = sys.rows();

  DetectorReport rep;
  rep.s = s;
  rep.eta = eta;
  rep.epsilon_s = epsilon_order_statistic(outcome, s);  // validates s

  std::vector<char> corrupted(m, 0);
  for (std::size_t i : outcome.support) corrupted[i] = 1;

  std::vector<std::size_t> order(m);
  std::vector<double> abs_r(m);
  std::vector<char> hits;
  hits.reserve(trace.checkpoints.size());
  for (const Checkpoint& cp : trace.checkpoints) {
    if (cp.x.size() != sys.cols())
      throw InvalidDims("checkpoint iterate has wrong length");
    Estimate est{cp.x};
    for (std::size_t i = 0; i < m; ++i) {
      abs_r[i] = std::abs(residual(sys, est, i));
      order[i] = i;
    }
    std::nth_element(order.begin(), order.begin() + (s - 1), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return abs_r[a] > abs_r[b];
                     });
    bool all_corrupted = true;
    for (std::size_t rank = 0; rank < s; ++rank)
      if (!corrupted[order[rank]]) {
        all_corrupted = false;
        break;
      }
    rep.checked_iterations.push_back(cp.iteration);
    hits.push_back(all_corrupted ? 1 : 0);
    if (all_corrupted) rep.hit_iterations.push_back(cp.iteration);

    if (!rep.first_small_error_iteration.has_value()) {
      double e2 = 0.0;
      for (std::size_t j = 0; j < cp.x.size(); ++j) {
        const double d = cp.x[j] - outcome.truth[j];
        e2 += d * d;
      }
      if (std::sqrt(e2) < rep.epsilon_s / 2.0)
        rep.first_small_error_iteration = cp.iteration;
    }
  }

  // Scan from the back for the longest all-hit suffix.
  std::size_t suffix_start = hits.size();
  for (std::size_t idx = hits.size(); idx-- > 0;) {
    if (!hits[idx]) break;
    suffix_start = idx;
  }
  if (suffix_start < hits.size())
    rep.first_stable_iteration = rep.checked_iterations[suffix_start];
  return rep;
}

}  // namespace kaczmarz
