#pragma once

// The three iterative solvers: plain randomized Kaczmarz (RK), quantile RK
// (QRK) with batch subsampling, and whitelist QRK (WL-QRK) which screens
// persistently large-residual rows into a blocklist. All solvers are
// deterministic functions of (system, config, seed) and record a full
// per-iteration trace.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/linalg.hpp"
#include "kaczmarz/sampling.hpp"

namespace kaczmarz {

// ---------------------------------------------------------------------------
// Ground-truth oracle (trace enrichment only; solvers never consult it for
// algorithmic decisions).

struct Oracle {
  std::vector<double> truth;
  std::vector<std::size_t> support;  // sorted corrupted-row indices
  std::vector<char> corrupted;       // size-m membership mask
};

inline Oracle make_oracle(std::vector<double> truth,
                          std::vector<std::size_t> support, std::size_t m) {
  Oracle o;
  o.truth = std::move(truth);
  o.support = std::move(support);
  o.corrupted.assign(m, 0);
  for (std::size_t i : o.support) {
    if (i >= m) throw IndexOutOfRange("support index " + std::to_string(i) +
                                      " >= m = " + std::to_string(m));
    o.corrupted[i] = 1;
  }
  return o;
}

// ---------------------------------------------------------------------------
// Trace

struct TracePoint {
  std::size_t iteration = 0;
  std::optional<double> rel_error;            // ||x - x*|| / ||x*||
  std::size_t wl_size = 0;                    // active pool size
  std::size_t bl_size = 0;
  std::optional<double> wl_corruption_frac;   // |WL ∩ support| / |WL|
  double q_current = 1.0;
  std::uint64_t wall_time_ns = 0;             // cumulative; informational
};

struct Checkpoint {
  std::size_t iteration = 0;
  std::vector<double> x;
};

struct RunTrace {
  std::vector<TracePoint> points;      // one per iteration, starting at 0
  std::vector<Checkpoint> checkpoints; // stride-spaced iterate snapshots
  Estimate final_x;
};

// Appends one record; oracle-dependent fields stay absent without an oracle.
inline void record_trace_point(RunTrace& trace, std::size_t iteration,
                               const Estimate& x,
                               std::span<const std::size_t> active_rows,
                               std::size_t bl_size, double q,
                               std::uint64_t wall_ns,
                               const Oracle* oracle) {
  TracePoint p;
  p.iteration = iteration;
  p.wl_size = active_rows.size();
  p.bl_size = bl_size;
  p.q_current = q;
  p.wall_time_ns = wall_ns;
  if (oracle != nullptr) {
    double diff2 = 0.0, truth2 = 0.0;
    for (std::size_t j = 0; j < x.x.size(); ++j) {
      const double d = x.x[j] - oracle->truth[j];
      diff2 += d * d;
      truth2 += oracle->truth[j] * oracle->truth[j];
    }
    const double err = std::sqrt(diff2) / std::sqrt(truth2);
    if (!std::isfinite(err))
      throw InvariantViolation("iterate error is not finite at iteration " +
                               std::to_string(iteration));
    p.rel_error = err;
    std::size_t hit = 0;
    for (std::size_t i : active_rows) hit += oracle->corrupted[i] != 0;
    p.wl_corruption_frac = active_rows.empty()
                               ? 0.0
                               : static_cast<double>(hit) /
                                     static_cast<double>(active_rows.size());
  }
  trace.points.push_back(std::move(p));
}

namespace detail {

inline void maybe_checkpoint(RunTrace& trace, std::size_t iteration,
                             const Estimate& x, std::size_t stride,
                             std::size_t total_iterations) {
  if (stride == 0) return;
  if (iteration % stride == 0 || iteration == total_iterations)
    trace.checkpoints.push_back({iteration, x.x});
}

inline std::uint64_t elapsed_ns(
    std::chrono::steady_clock::time_point start) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now() - start)
          .count());
}

inline std::vector<std::size_t> identity_pool(std::size_t m) {
  std::vector<std::size_t> pool(m);
  for (std::size_t i = 0; i < m; ++i) pool[i] = i;
  return pool;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plain randomized Kaczmarz. Rows are unit-norm, so uniform row sampling
// coincides with the classical norm-proportional scheme.

struct RkConfig {
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_stride = 0;  // 0 = no iterate snapshots
};

inline RunTrace rk_solve(const LinearSystem& system, const RkConfig& config,
                         const Estimate& x0, const Oracle* oracle = nullptr) {
  if (x0.x.size() != system.cols())
    throw InvalidDims("x0 length does not match system columns");
  const std::size_t m = system.rows();
  const std::vector<std::size_t> pool = detail::identity_pool(m);
  RngStream rng(config.seed);
  Estimate x = x0;
  RunTrace trace;
  const auto start = std::chrono::steady_clock::now();
  record_trace_point(trace, 0, x, pool, 0, 1.0, 0, oracle);
  detail::maybe_checkpoint(trace, 0, x, config.checkpoint_stride,
                           config.iterations);
  for (std::size_t j = 1; j <= config.iterations; ++j) {
    const auto k = static_cast<std::size_t>(rng.next_below(m));
    const double r = residual(system, x, k);
    detail::kaczmarz_update(x.x, system.row(k), r);
    record_trace_point(trace, j, x, pool, 0, 1.0, detail::elapsed_ns(start),
                       oracle);
    detail::maybe_checkpoint(trace, j, x, config.checkpoint_stride,
                             config.iterations);
  }
  trace.final_x = std::move(x);
  return trace;
}

// ---------------------------------------------------------------------------
// Quantile RK over an arbitrary sampling pool.

struct QrkConfig {
  double q = 0.5;             // admissibility quantile
  std::size_t t = 1;          // batch size (t = m recovers full residuals)
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_stride = 0;

  void validate() const {
    if (!(q > 0.0) || q > 1.0)
      throw ConfigError("q must lie in (0, 1], got " + std::to_string(q));
    if (t < 1) throw ConfigError("batch size t must be at least 1");
  }
};

namespace detail {

// Batch positions whose absolute residual is within the threshold. Never
// empty: tau is the ceil(q*t)-th smallest of the same values.
inline std::vector<std::size_t> admissible_positions(
    std::span<const double> abs_residuals, double tau) {
  std::vector<std::size_t> pos;
  for (std::size_t l = 0; l < abs_residuals.size(); ++l)
    if (abs_residuals[l] <= tau) pos.push_back(l);
  if (pos.empty())
    throw InvariantViolation("admissible set is empty");
  return pos;
}

// One shared QRK iteration: sample a batch from the pool, threshold at the
// lower q-quantile of |residuals|, project onto one admissible row. Both
// qrk_solve and wlqrk_solve run through this function so their iterates
// match bit-for-bit whenever pools, q, and RNG state coincide. The update
// reuses the batch residual: x is unchanged between the residual computation
// and the projection, so this is the same arithmetic as recomputing it.
struct QrkIteration {
  std::vector<std::size_t> batch;   // drawn row indices (with replacement)
  std::vector<double> residuals;    // signed, at the pre-update iterate
  std::vector<double> abs_residuals;
  double tau_q = 0.0;
  std::size_t picked = 0;           // batch position that was projected
};

inline QrkIteration qrk_iteration(const LinearSystem& system, Estimate& x,
                                  std::span<const std::size_t> pool, double q,
                                  std::size_t t, RngStream& rng) {
  QrkIteration it;
  it.batch = sample_uniform_indices(rng, pool, t);
  it.residuals = batch_residuals(system, x, it.batch);
  it.abs_residuals.resize(it.residuals.size());
  for (std::size_t l = 0; l < it.residuals.size(); ++l)
    it.abs_residuals[l] = std::abs(it.residuals[l]);
  it.tau_q = lower_quantile(it.abs_residuals, q);
  const std::vector<std::size_t> adm =
      admissible_positions(it.abs_residuals, it.tau_q);
  it.picked = adm[static_cast<std::size_t>(
      rng.next_below(static_cast<std::uint64_t>(adm.size())))];
  kaczmarz_update(x.x, system.row(it.batch[it.picked]),
                  it.residuals[it.picked]);
  return it;
}

}  // namespace detail

inline RunTrace qrk_solve(const LinearSystem& system, const QrkConfig& config,
                          std::span<const std::size_t> pool,
                          const Estimate& x0,
                          const Oracle* oracle = nullptr) {
  config.validate();
  if (pool.empty()) throw EmptyPool("qrk sampling pool is empty");
  for (std::size_t i : pool)
    if (i >= system.rows())
      throw IndexOutOfRange("pool row " + std::to_string(i) + " out of range");
  if (x0.x.size() != system.cols())
    throw InvalidDims("x0 length does not match system columns");
  RngStream rng(config.seed);
  Estimate x = x0;
  RunTrace trace;
  const auto start = std::chrono::steady_clock::now();
  record_trace_point(trace, 0, x, pool, 0, config.q, 0, oracle);
  detail::maybe_checkpoint(trace, 0, x, config.checkpoint_stride,
                           config.iterations);
  for (std::size_t j = 1; j <= config.iterations; ++j) {
    detail::qrk_iteration(system, x, pool, config.q, config.t, rng);
    record_trace_point(trace, j, x, pool, 0, config.q,
                       detail::elapsed_ns(start), oracle);
    detail::maybe_checkpoint(trace, j, x, config.checkpoint_stride,
                             config.iterations);
  }
  trace.final_x = std::move(x);
  return trace;
}

// ---------------------------------------------------------------------------
// WL-QRK

struct SolverConfig {
  double beta_bound = 0.0;        // user's upper bound on corruption fraction
  double alpha = 0.05;            // confidence gap
  std::size_t t = 1;              // batch size
  std::size_t n1 = 0;             // warm-up iterations
  std::size_t n2 = 0;             // post-warm-up iterations
  std::size_t s_cycle = 1;        // blocking cycle length S
  double thr = 0.0;               // block threshold quantile; 0 = default
  double block_vote_ratio = 0.9;  // votes needed as a fraction of samples
  double q_min = 0.05;            // lower clamp for the adaptive q
  std::uint64_t seed = 0;
  std::size_t checkpoint_stride = 0;

  double q0() const { return 1.0 - alpha - beta_bound; }
  // Default blocking quantile: halfway between q0 and 1, which satisfies the
  // required thr > q0 for every valid (alpha, beta_bound).
  double effective_thr() const { return thr == 0.0 ? (q0() + 1.0) / 2.0 : thr; }

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (beta_bound < 0.0) throw ConfigError("beta_bound must be nonnegative");
    if (!(alpha + beta_bound < 1.0))
      throw ConfigError("alpha + beta_bound must be below 1, got " +
                        std::to_string(alpha + beta_bound));
    if (t < 1) throw ConfigError("batch size t must be at least 1");
    if (s_cycle < 1) throw ConfigError("s_cycle must be at least 1");
    const double th = effective_thr();
    if (!(th > 0.0) || th > 1.0)
      throw ConfigError("thr must lie in (0, 1], got " + std::to_string(th));
    if (!(th > q0()))
      throw ConfigError("thr (" + std::to_string(th) +
                        ") must exceed q0 = 1 - alpha - beta_bound (" +
                        std::to_string(q0()) + ")");
    if (!(block_vote_ratio > 0.0) || block_vote_ratio > 1.0)
      throw ConfigError("block_vote_ratio must lie in (0, 1]");
    if (!(q_min > 0.0) || q_min > q0())
      throw ConfigError("q_min must lie in (0, q0]; q0 = " +
                        std::to_string(q0()));
  }
};

// Disjoint whitelist/blocklist partition of [m] with per-row sampling and
// blocking counters. Rows move between lists in O(1); every mutation checks
// its own local consistency, and check_partition() audits the whole
// partition (used once per blocking cycle and by tests).
class WhitelistState {
 public:
  WhitelistState(std::size_t m, double q0, double q_min, double q_max)
      : pos_(m), in_wl_(m, 1), samples_(m, 0), votes_(m, 0),
        q_(q0), q_min_(q_min), q_max_(q_max) {
    if (m == 0) throw InvalidDims("whitelist over an empty row set");
    wl_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      wl_[i] = i;
      pos_[i] = i;
    }
  }

  const std::vector<std::size_t>& whitelist() const { return wl_; }
  const std::vector<std::size_t>& blocklist() const { return bl_; }
  double q() const { return q_; }
  bool in_whitelist(std::size_t i) const { return in_wl_[check(i)] != 0; }
  std::uint64_t sample_count(std::size_t i) const { return samples_[check(i)]; }
  std::uint64_t block_votes(std::size_t i) const { return votes_[check(i)]; }

  void note_sample(std::size_t i) { ++samples_[check(i)]; }

  void note_block(std::size_t i) {
    check(i);
    if (votes_[i] + 1 > samples_[i])
      throw InvariantViolation("block votes would exceed samples for row " +
                               std::to_string(i));
    ++votes_[i];
  }

  void reset_counters() {
    std::fill(samples_.begin(), samples_.end(), 0);
    std::fill(votes_.begin(), votes_.end(), 0);
  }

  void move_to_blocklist(std::size_t i) {
    if (!in_whitelist(i))
      throw InvariantViolation("row " + std::to_string(i) +
                               " is not whitelisted; cannot block it");
    swap_remove(wl_, pos_[i]);
    pos_[i] = bl_.size();
    bl_.push_back(i);
    in_wl_[i] = 0;
    assert_sizes();
  }

  void move_to_whitelist(std::size_t i) {
    if (in_whitelist(i))
      throw InvariantViolation("row " + std::to_string(i) +
                               " is not blocked; cannot return it");
    swap_remove(bl_, pos_[i]);
    pos_[i] = wl_.size();
    wl_.push_back(i);
    in_wl_[i] = 1;
    assert_sizes();
  }

  // Clamp keeps the adaptive quantile inside [q_min, 1 - alpha]; the raw
  // update can leave that interval when |BL| overshoots beta*m.
  void set_q(double q) { q_ = std::clamp(q, q_min_, q_max_); }

  // Full audit: WL and BL are disjoint, cover [m], and agree with the flags.
  void check_partition() const {
    const std::size_t m = in_wl_.size();
    if (wl_.size() + bl_.size() != m)
      throw InvariantViolation("whitelist/blocklist sizes do not sum to m");
    std::vector<char> seen(m, 0);
    for (std::size_t p = 0; p < wl_.size(); ++p) {
      const std::size_t i = wl_[p];
      if (i >= m || seen[i] || !in_wl_[i] || pos_[i] != p)
        throw InvariantViolation("whitelist entry " + std::to_string(i) +
                                 " is inconsistent");
      seen[i] = 1;
    }
    for (std::size_t p = 0; p < bl_.size(); ++p) {
      const std::size_t i = bl_[p];
      if (i >= m || seen[i] || in_wl_[i] || pos_[i] != p)
        throw InvariantViolation("blocklist entry " + std::to_string(i) +
                                 " is inconsistent");
      seen[i] = 1;
    }
  }

 private:
  std::size_t check(std::size_t i) const {
    if (i >= in_wl_.size())
      throw IndexOutOfRange("row " + std::to_string(i) + " out of range");
    return i;
  }

  void swap_remove(std::vector<std::size_t>& list, std::size_t p) {
    const std::size_t moved = list.back();
    list[p] = moved;
    pos_[moved] = p;
    list.pop_back();
  }

  void assert_sizes() const {
    if (wl_.size() + bl_.size() != in_wl_.size())
      throw InvariantViolation("partition lost a row");
  }

  std::vector<std::size_t> wl_, bl_;
  std::vector<std::size_t> pos_;  // index of row i inside its current list
  std::vector<char> in_wl_;
  std::vector<std::uint64_t> samples_, votes_;
  double q_, q_min_, q_max_;
};

// Whitelist QRK. Warm-up iterations are plain QRK steps at q0 = 1-alpha-beta
// over the (full) whitelist; every s_cycle iterations afterwards, blocked
// rows whose full residual fell within tau_q return to the whitelist, and —
// while |BL| < beta*m — whitelisted rows sampled at least S*t/|WL| times
// with a block-vote share >= block_vote_ratio are discarded and all counters
// reset. The target quantile then adapts to the blocklist size.
inline RunTrace wlqrk_solve(const LinearSystem& system,
                            const SolverConfig& config, const Estimate& x0,
                            const Oracle* oracle = nullptr) {
  config.validate();
  if (x0.x.size() != system.cols())
    throw InvalidDims("x0 length does not match system columns");
  const std::size_t m = system.rows();
  const double beta_m = config.beta_bound * static_cast<double>(m);
  const double thr = config.effective_thr();
  WhitelistState state(m, config.q0(), config.q_min, 1.0 - config.alpha);
  RngStream rng(config.seed);
  Estimate x = x0;
  RunTrace trace;
  const std::size_t total = config.n1 + config.n2;
  const auto start = std::chrono::steady_clock::now();
  record_trace_point(trace, 0, x, state.whitelist(), 0, state.q(), 0, oracle);
  detail::maybe_checkpoint(trace, 0, x, config.checkpoint_stride, total);

  for (std::size_t j = 1; j <= total; ++j) {
    const detail::QrkIteration it = detail::qrk_iteration(
        system, x, state.whitelist(), state.q(), config.t, rng);
    const double tau_thr = lower_quantile(it.abs_residuals, thr);
    for (std::size_t l = 0; l < it.batch.size(); ++l) {
      state.note_sample(it.batch[l]);
      if (it.abs_residuals[l] > tau_thr) state.note_block(it.batch[l]);
    }

    if (j > config.n1 && j % config.s_cycle == 0) {
      // Blocked rows whose full residual now passes the admissibility test
      // (with this iteration's tau_q) come back first.
      std::vector<std::size_t> returns;
      for (std::size_t i : state.blocklist())
        if (std::abs(residual(system, x, i)) <= it.tau_q)
          returns.push_back(i);
      for (std::size_t i : returns) state.move_to_whitelist(i);

      if (static_cast<double>(state.blocklist().size()) < beta_m) {
        const double needed_samples =
            static_cast<double>(config.s_cycle) * static_cast<double>(config.t) /
            static_cast<double>(state.whitelist().size());
        std::vector<std::size_t> discards;
        for (std::size_t i : state.whitelist()) {
          const auto s_i = static_cast<double>(state.sample_count(i));
          const auto b_i = static_cast<double>(state.block_votes(i));
          if (s_i >= needed_samples && b_i >= config.block_vote_ratio * s_i)
            discards.push_back(i);
        }
        if (discards.size() >= state.whitelist().size())
          throw RegimeViolation("blocking cycle would empty the whitelist");
        state.reset_counters();
        for (std::size_t i : discards) state.move_to_blocklist(i);
      }
      const auto l_wl = static_cast<double>(state.whitelist().size());
      const auto l_bl = static_cast<double>(state.blocklist().size());
      state.set_q(1.0 - config.alpha - (beta_m - l_bl) / l_wl);
      state.check_partition();
    }

    record_trace_point(trace, j, x, state.whitelist(),
                       state.blocklist().size(), state.q(),
                       detail::elapsed_ns(start), oracle);
    detail::maybe_checkpoint(trace, j, x, config.checkpoint_stride, total);
  }
  trace.final_x = std::move(x);
  return trace;
}

}  // namespace kaczmarz
