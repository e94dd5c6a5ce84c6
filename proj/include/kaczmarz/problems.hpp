#pragma once

// Benchmark problem construction: synthetic Gaussian systems, a native
// ray-tracing tomography generator, CSV ingestion, and sparse label
// corruption in four layered models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kaczmarz/csv.hpp"
#include "kaczmarz/errors.hpp"
#include "kaczmarz/linalg.hpp"
#include "kaczmarz/sampling.hpp"

namespace kaczmarz {

inline constexpr double kConsistencyTol = 1e-10;

struct GeneratedProblem {
  LinearSystem system;        // row-normalized, labels consistent with truth
  std::vector<double> truth;  // x*, length n
};

struct LoadedProblem {
  LinearSystem system;
  std::optional<std::vector<double>> truth;  // present iff made consistent
};

enum class CorruptionModel { TwoLayer, FiveLayer, Uniform, TwoLayerTomo };

// One additive layer: `count` corrupted rows receive u ~ Unif(lo, hi).
struct CorruptionLayer {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct CorruptionSpec {
  CorruptionModel model = CorruptionModel::Uniform;
  double beta = 0.0;       // corruption budget as a fraction of m
  std::uint64_t seed = 0;  // support selection + perturbation draws
  // Empty = use the model's default layers for budget floor(beta*m).
  std::vector<CorruptionLayer> layers;
};

struct CorruptionOutcome {
  LinearSystem system;               // labels = clean_labels + epsilon
  std::vector<double> clean_labels;  // b before corruption
  std::vector<double> truth;         // x*
  std::vector<std::size_t> support;  // sorted indices of corrupted rows
};

// ---------------------------------------------------------------------------
// Generators

// A has i.i.d. standard normal entries (drawn row-major), truth has i.i.d.
// standard normal entries (drawn after A); labels = A*truth, then rows and
// labels are jointly normalized so the system stays consistent.
inline GeneratedProblem gen_gaussian_system(std::size_t m, std::size_t n,
                                            std::uint64_t seed) {
  if (m < n || n < 1)
    throw InvalidDims("gen_gaussian_system needs m >= n >= 1, got " +
                      std::to_string(m) + "x" + std::to_string(n));
  RngStream rng(seed);
  RowMatrix a;
  a.rows = m;
  a.cols = n;
  a.data.resize(m * n);
  sample_gaussian(rng, a.data);
  std::vector<double> truth(n);
  sample_gaussian(rng, truth);
  std::vector<double> labels(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a.data[i * n + j] * truth[j];
    labels[i] = s;
  }
  return {normalize_rows(std::move(a), std::move(labels)), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Tomography

// Intersection lengths of the line {center + rho*normal + t*direction} with
// the N x N unit-pixel grid covering [0,N]^2. Angle theta in [0,pi) gives
// direction (cos, sin); offset rho is measured from the grid center along the
// left normal (-sin, cos). Pixel (ix, iy) occupies [ix,ix+1) x [iy,iy+1) and
// lands at flat index iy*N + ix. Returns all zeros when the line misses.
inline std::vector<double> tomography_ray(std::size_t n_grid, double theta,
                                          double rho) {
  const double size = static_cast<double>(n_grid);
  const double dx = std::cos(theta), dy = std::sin(theta);
  const double ox = size / 2.0 - rho * dy;  // point on the line
  const double oy = size / 2.0 + rho * dx;
  std::vector<double> lengths(n_grid * n_grid, 0.0);

  // Slab intersection of the infinite line with [0,size]^2.
  double t_enter = -1e300, t_exit = 1e300;
  const double axes[2][2] = {{ox, dx}, {oy, dy}};
  for (const auto& ax : axes) {
    if (std::abs(ax[1]) < 1e-15) {
      if (ax[0] < 0.0 || ax[0] > size) return lengths;  // parallel, outside
      continue;
    }
    double t0 = (0.0 - ax[0]) / ax[1];
    double t1 = (size - ax[0]) / ax[1];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter >= t_exit) return lengths;

  // Split [t_enter, t_exit] at every gridline crossing; direction is unit
  // length, so parameter differences are geometric lengths.
  std::vector<double> cuts{t_enter, t_exit};
  for (std::size_t k = 0; k <= n_grid; ++k) {
    const double line = static_cast<double>(k);
    if (std::abs(dx) > 1e-15) {
      const double t = (line - ox) / dx;
      if (t > t_enter && t < t_exit) cuts.push_back(t);
    }
    if (std::abs(dy) > 1e-15) {
      const double t = (line - oy) / dy;
      if (t > t_enter && t < t_exit) cuts.push_back(t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double len = cuts[s + 1] - cuts[s];
    if (len <= 1e-12) continue;
    const double tm = 0.5 * (cuts[s] + cuts[s + 1]);
    const double px = ox + tm * dx, py = oy + tm * dy;
    const auto ix = static_cast<std::ptrdiff_t>(std::floor(px));
    const auto iy = static_cast<std::ptrdiff_t>(std::floor(py));
    if (ix < 0 || iy < 0 || ix >= static_cast<std::ptrdiff_t>(n_grid) ||
        iy >= static_cast<std::ptrdiff_t>(n_grid))
      continue;  // boundary-grazing segment
    lengths[static_cast<std::size_t>(iy) * n_grid +
            static_cast<std::size_t>(ix)] += len;
  }
  return lengths;
}

// Fixed piecewise-constant phantom: three disjoint disks of intensities
// 1, 0.5, 0.25 on a zero background, sampled at pixel centers. Centers and
// radii are fractions of the grid side, so the shape is scale-invariant.
inline std::vector<double> tomography_phantom(std::size_t n_grid) {
  struct Disk {
    double cx, cy, r, value;
  };
  static constexpr Disk kDisks[] = {
      {0.34, 0.40, 0.20, 1.0},
      {0.68, 0.62, 0.16, 0.5},
      {0.42, 0.72, 0.10, 0.25},
  };
  const double size = static_cast<double>(n_grid);
  std::vector<double> img(n_grid * n_grid, 0.0);
  for (std::size_t iy = 0; iy < n_grid; ++iy) {
    for (std::size_t ix = 0; ix < n_grid; ++ix) {
      const double px = (static_cast<double>(ix) + 0.5) / size;
      const double py = (static_cast<double>(iy) + 0.5) / size;
      for (const auto& d : kDisks) {
        const double ddx = px - d.cx, ddy = py - d.cy;
        if (ddx * ddx + ddy * ddy <= d.r * d.r) {
          img[iy * n_grid + ix] = d.value;
          break;
        }
      }
    }
  }
  return img;
}

// Random rays: theta ~ Unif[0, pi), rho ~ Unif(-N/sqrt(2), N/sqrt(2)) from
// the grid center; rays that miss the grid (or graze it with negligible
// total length) are redrawn. Labels are line integrals of the phantom.
inline GeneratedProblem gen_tomography_system(std::size_t n_grid,
                                              std::size_t num_rays,
                                              std::uint64_t seed) {
  if (n_grid < 2)
    throw InvalidDims("tomography grid must be at least 2x2");
  const std::size_t n = n_grid * n_grid;
  if (num_rays < n)
    throw InvalidDims("need at least N^2 = " + std::to_string(n) +
                      " rays, got " + std::to_string(num_rays));
  const std::vector<double> phantom = tomography_phantom(n_grid);
  const double half_diag =
      static_cast<double>(n_grid) / std::sqrt(2.0);

  RngStream rng(seed);
  RowMatrix a;
  a.rows = num_rays;
  a.cols = n;
  a.data.reserve(num_rays * n);
  std::vector<double> labels;
  labels.reserve(num_rays);

  const double pi = std::acos(-1.0);
  std::size_t attempts = 0;
  const std::size_t max_attempts = 1000 * num_rays;
  while (labels.size() < num_rays) {
    if (++attempts > max_attempts)
      throw InvariantViolation("ray sampling failed to hit the grid");
    const double theta = sample_real_uniform(rng, 0.0, pi);
    const double rho = sample_real_uniform(rng, -half_diag, half_diag);
    const std::vector<double> row = tomography_ray(n_grid, theta, rho);
    double norm2 = 0.0, integral = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      norm2 += row[j] * row[j];
      integral += row[j] * phantom[j];
    }
    if (norm2 < 1e-12) continue;  // miss; redraw
    a.data.insert(a.data.end(), row.begin(), row.end());
    labels.push_back(integral);
  }
  return {normalize_rows(std::move(a), std::move(labels)), phantom};
}

// ---------------------------------------------------------------------------
// CSV ingestion

// Numeric CSV, one observation per line, last column is the label. With
// make_consistent (the default downstream), the labels are replaced by
// A * x_ls where x_ls is the least-squares fit, so the clean system is
// exactly consistent and x_ls doubles as the ground truth.
inline LoadedProblem load_csv_system(const std::string& path,
                                     bool make_consistent,
                                     bool skip_header = false) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t n_cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (skip_header && line_no == 1) continue;
    std::vector<double> fields;
    for (const std::string& cell : detail::split_csv_line(line))
      fields.push_back(detail::parse_csv_field(cell, line_no));
    if (n_cols == 0) {
      n_cols = fields.size();
      if (n_cols < 2)
        throw ParseError(line_no,
                         "need at least one feature column plus a label");
    } else if (fields.size() != n_cols) {
      throw ParseError(line_no, "expected " + std::to_string(n_cols) +
                                    " fields, got " +
                                    std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw EmptyFile(path);

  const std::size_t m = rows.size(), n = n_cols - 1;
  RowMatrix a;
  a.rows = m;
  a.cols = n;
  a.data.resize(m * n);
  std::vector<double> b(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) a.data[i * n + j] = rows[i][j];
    b[i] = rows[i][n];
  }
  LinearSystem sys = normalize_rows(std::move(a), std::move(b));
  if (!make_consistent) return {std::move(sys), std::nullopt};

  Estimate fit = least_squares(sys);
  std::vector<double> consistent(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    auto row = sys.row(i);
    for (std::size_t j = 0; j < n; ++j) s += row[j] * fit.x[j];
    consistent[i] = s;
  }
  return {sys.with_labels(std::move(consistent)), std::move(fit.x)};
}

// ---------------------------------------------------------------------------
// Corruption

// Default layer splits for each model at a given row budget. TwoLayer halves
// the budget (large layer first); FiveLayer spreads the budget over decades
// 10^{x-1}..10^x for x in {-2..2}, remainder to the earliest layers;
// TwoLayerTomo uses the fixed 100 + 120 split regardless of budget.
inline std::vector<CorruptionLayer> default_layers(CorruptionModel model,
                                                   std::size_t budget) {
  switch (model) {
    case CorruptionModel::TwoLayer: {
      const std::size_t small = budget / 2;
      return {{1.0, 5.0, budget - small}, {0.01, 0.05, small}};
    }
    case CorruptionModel::FiveLayer: {
      std::vector<CorruptionLayer> layers;
      const std::size_t base = budget / 5, extra = budget % 5;
      for (int x = -2; x <= 2; ++x) {
        layers.push_back({std::pow(10.0, x - 1), std::pow(10.0, x),
                          base + (static_cast<std::size_t>(x + 2) < extra
                                      ? std::size_t{1}
                                      : std::size_t{0})});
      }
      return layers;
    }
    case CorruptionModel::Uniform:
      return {{-5.0, 5.0, budget}};
    case CorruptionModel::TwoLayerTomo:
      return {{1.0, 2.0, 100}, {40.0, 100.0, 120}};
  }
  throw ConfigError("unknown corruption model");
}

namespace detail {

// First `count` entries of a uniformly random permutation of [0, m).
inline std::vector<std::size_t> sample_distinct_indices(RngStream& rng,
                                                        std::size_t m,
                                                        std::size_t count) {
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t k = j + static_cast<std::size_t>(
                                  rng.next_below(static_cast<std::uint64_t>(m - j)));
    std::swap(idx[j], idx[k]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace detail

// Adds u ~ Unif(lo, hi) to the labels of floor(beta*m) rows selected
// uniformly without replacement, layer by layer in draw order. Draws that
// would leave a label bit-identical (u == 0 or full absorption) are redrawn
// so corrupted labels provably differ from clean ones.
inline CorruptionOutcome apply_corruption(const LinearSystem& clean,
                                          std::vector<double> truth,
                                          const CorruptionSpec& spec) {
  const std::size_t m = clean.rows();
  if (spec.beta < 0.0 || spec.beta >= 1.0)
    throw ConfigError("corruption fraction must lie in [0, 1)");
  if (truth.size() != clean.cols())
    throw InvalidDims("truth length does not match system columns");
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    auto row = clean.row(i);
    for (std::size_t j = 0; j < truth.size(); ++j) s += row[j] * truth[j];
    if (std::abs(s - clean.label(i)) > kConsistencyTol)
      throw ConfigError("clean system is not consistent with truth at row " +
                        std::to_string(i));
  }

  const auto budget = static_cast<std::size_t>(
      std::floor(spec.beta * static_cast<double>(m)));
  const std::vector<CorruptionLayer> layers =
      spec.layers.empty() ? default_layers(spec.model, budget) : spec.layers;
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.count;
  if (total > budget)
    throw LayerCountMismatch("layer rows (" + std::to_string(total) +
                             ") exceed corruption budget (" +
                             std::to_string(budget) + ")");

  RngStream rng(spec.seed);
  std::vector<std::size_t> chosen =
      detail::sample_distinct_indices(rng, m, total);
  std::vector<double> corrupted(clean.labels().begin(), clean.labels().end());
  std::size_t next = 0;
  for (const auto& layer : layers) {
    for (std::size_t c = 0; c < layer.count; ++c) {
      const std::size_t row = chosen[next++];
      double u;
      do {
        u = sample_real_uniform(rng, layer.lo, layer.hi);
      } while (corrupted[row] + u == corrupted[row]);
      corrupted[row] += u;
    }
  }

  std::vector<std::size_t> support = std::move(chosen);
  std::sort(support.begin(), support.end());
  std::vector<double> clean_labels(clean.labels().begin(),
                                   clean.labels().end());
  return {clean.with_labels(std::move(corrupted)), std::move(clean_labels),
          std::move(truth), std::move(support)};
}

}  // namespace kaczmarz
