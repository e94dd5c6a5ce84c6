#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kaczmarz/errors.hpp"

namespace kaczmarz {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Dense row-contiguous matrix. The solvers only ever touch one row at a time,
// so row spans are the primary access path.
struct RowMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-contiguous

  RowMatrix() = default;
  RowMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
};

// Current iterate of a solver run.
struct Estimate {
  std::vector<double> x;
};

// Row-normalized measurement matrix plus observed labels. Immutable after
// construction; safe to share read-only across concurrent trials.
class LinearSystem {
 public:
  static constexpr double kMinRowNorm = 1e-14;

  std::size_t rows() const { return matrix_.rows; }
  std::size_t cols() const { return matrix_.cols; }
  std::span<const double> row(std::size_t i) const { return matrix_.row(i); }
  const RowMatrix& matrix() const { return matrix_; }
  const std::vector<double>& labels() const { return labels_; }
  double label(std::size_t i) const { return labels_[i]; }

  // Same rows, different labels. The replacement is taken as-is: rows are
  // already unit norm, so no rescaling happens.
  LinearSystem with_labels(std::vector<double> new_labels) const {
    if (new_labels.size() != rows())
      throw InvalidDims("with_labels: expected " + std::to_string(rows()) +
                        " labels, got " + std::to_string(new_labels.size()));
    LinearSystem out;
    out.matrix_ = matrix_;
    out.labels_ = std::move(new_labels);
    return out;
  }

  friend LinearSystem normalize_rows(RowMatrix raw, std::vector<double> raw_labels);

 private:
  LinearSystem() = default;
  RowMatrix matrix_;
  std::vector<double> labels_;
};

// Divides every row and its label by the row's Euclidean norm. Rejects rows
// with norm below 1e-14 and systems with m < n.
inline LinearSystem normalize_rows(RowMatrix raw, std::vector<double> raw_labels) {
  if (raw.rows < raw.cols || raw.cols < 1)
    throw InvalidDims("normalize_rows: need m >= n >= 1, got " +
                      std::to_string(raw.rows) + "x" + std::to_string(raw.cols));
  if (raw.data.size() != raw.rows * raw.cols)
    throw InvalidDims("normalize_rows: matrix storage does not match dimensions");
  if (raw_labels.size() != raw.rows)
    throw InvalidDims("normalize_rows: label count does not match row count");

  for (std::size_t i = 0; i < raw.rows; ++i) {
    auto r = raw.row(i);
    const double len = norm(r);
    if (len < LinearSystem::kMinRowNorm) throw ZeroRow(i);
    const double inv = 1.0 / len;
    for (double& v : r) v *= inv;
    raw_labels[i] *= inv;
  }

  LinearSystem out;
  out.matrix_ = std::move(raw);
  out.labels_ = std::move(raw_labels);
  return out;
}

// Signed violation <a_i, x> - b_i of equation i at the iterate x.
inline double residual(const LinearSystem& system, const Estimate& x, std::size_t i) {
  if (i >= system.rows())
    throw IndexOutOfRange("residual: row " + std::to_string(i) + " of " +
                          std::to_string(system.rows()));
  return dot(system.row(i), x.x) - system.label(i);
}

// Residuals for a multiset of row indices; duplicates yield duplicate entries.
inline std::vector<double> batch_residuals(const LinearSystem& system,
                                           const Estimate& x,
                                           std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(residual(system, x, i));
  return out;
}

namespace detail {

// x <- x - r * a with r precomputed at the current x. The solvers use this
// directly so the residual evaluated for the quantile test is the one that
// enters the projection.
inline void kaczmarz_update(std::vector<double>& x, std::span<const double> a,
                            double r) {
  if (!std::isfinite(r))
    throw InvariantViolation("kaczmarz_update: non-finite residual");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= r * a[i];
}

}  // namespace detail

// Orthogonal projection of x onto the hyperplane of one unit-norm equation.
inline Estimate rk_step(const Estimate& x, std::span<const double> a, double label) {
  if (a.size() != x.x.size())
    throw InvalidDims("rk_step: row length does not match iterate");
  const double len = norm(a);
  if (std::abs(len - 1.0) > 1e-12)
    throw NonUnitRow("rk_step: row norm " + std::to_string(len) + " is not 1");
  Estimate out = x;
  detail::kaczmarz_update(out.x, a, dot(a, out.x) - label);
  return out;
}

// Least-squares solution of the (possibly inconsistent) system by conjugate
// gradients on the normal equations (CGLS). Stops once the recurred normal
// residual satisfies ||A^T (A x - b)|| <= tolerance * ||A^T b||.
inline Estimate least_squares(const LinearSystem& system, double tolerance = 1e-10,
                              std::size_t max_iters = 0) {
  const std::size_t m = system.rows();
  const std::size_t n = system.cols();
  if (max_iters == 0) max_iters = 10 * n;

  Estimate est;
  est.x.assign(n, 0.0);
  std::vector<double> r = system.labels();  // b - A * 0
  std::vector<double> s(n, 0.0);            // A^T r
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = system.row(i);
    for (std::size_t j = 0; j < n; ++j) s[j] += r[i] * row[j];
  }
  double gamma = dot(s, s);
  const double target = tolerance * std::sqrt(gamma);
  if (std::sqrt(gamma) <= target) return est;

  std::vector<double> p = s;
  std::vector<double> w(m, 0.0);
  for (std::size_t it = 1; it <= max_iters; ++it) {
    for (std::size_t i = 0; i < m; ++i) w[i] = dot(system.row(i), p);
    const double denom = dot(w, w);
    if (denom == 0.0) throw NoConvergence(std::sqrt(gamma), target, it);
    const double step = gamma / denom;
    for (std::size_t j = 0; j < n; ++j) est.x[j] += step * p[j];
    for (std::size_t i = 0; i < m; ++i) r[i] -= step * w[i];
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = system.row(i);
      for (std::size_t j = 0; j < n; ++j) s[j] += r[i] * row[j];
    }
    const double gamma_next = dot(s, s);
    if (std::sqrt(gamma_next) <= target) return est;
    const double beta = gamma_next / gamma;
    for (std::size_t j = 0; j < n; ++j) p[j] = s[j] + beta * p[j];
    gamma = gamma_next;
  }
  throw NoConvergence(std::sqrt(gamma), target, max_iters);
}

}  // namespace kaczmarz
