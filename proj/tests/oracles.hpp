#pragma once

// Independent reference computations used only by tests. Nothing here shares
// code with the implementation paths under include/.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "kaczmarz/linalg.hpp"

namespace oracles {

// Lower q-quantile by full sort: k-th smallest with k = max(1, ceil(q * len)).
inline double sorted_lower_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  std::size_t k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  if (k < 1) k = 1;
  if (k > values.size()) k = values.size();
  return values[k - 1];
}

// Dense least squares min ||Ax - b|| via Householder QR. O(m n^2).
inline std::vector<double> qr_least_squares(kaczmarz::RowMatrix a,
                                            std::vector<double> b) {
  const std::size_t m = a.rows;
  const std::size_t n = a.cols;
  if (b.size() != m || m < n) throw std::invalid_argument("qr_least_squares: dims");

  for (std::size_t k = 0; k < n; ++k) {
    double colnorm = 0.0;
    for (std::size_t i = k; i < m; ++i) colnorm += a(i, k) * a(i, k);
    colnorm = std::sqrt(colnorm);
    if (colnorm == 0.0) throw std::runtime_error("qr_least_squares: rank deficient");

    double alpha = (a(k, k) > 0.0) ? -colnorm : colnorm;
    std::vector<double> v(m - k, 0.0);
    v[0] = a(k, k) - alpha;
    for (std::size_t i = k + 1; i < m; ++i) v[i - k] = a(i, k);
    double vnorm2 = 0.0;
    for (double vi : v) vnorm2 += vi * vi;
    if (vnorm2 == 0.0) continue;  // column already reduced

    // Apply H = I - 2 v v^T / (v^T v) to the trailing columns and to b.
    for (std::size_t j = k; j < n; ++j) {
      double proj = 0.0;
      for (std::size_t i = k; i < m; ++i) proj += v[i - k] * a(i, j);
      proj = 2.0 * proj / vnorm2;
      for (std::size_t i = k; i < m; ++i) a(i, j) -= proj * v[i - k];
    }
    double proj = 0.0;
    for (std::size_t i = k; i < m; ++i) proj += v[i - k] * b[i];
    proj = 2.0 * proj / vnorm2;
    for (std::size_t i = k; i < m; ++i) b[i] -= proj * v[i - k];
  }

  // Back-substitute R x = (Q^T b)[0..n).
  std::vector<double> x(n, 0.0);
  for (std::size_t jj = n; jj-- > 0;) {
    double acc = b[jj];
    for (std::size_t k = jj + 1; k < n; ++k) acc -= a(jj, k) * x[k];
    if (a(jj, jj) == 0.0) throw std::runtime_error("qr_least_squares: singular R");
    x[jj] = acc / a(jj, jj);
  }
  return x;
}

}  // namespace oracles
