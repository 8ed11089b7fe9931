#ifndef COALA_AUTODIFF_LINSOLVE_HPP_
#define COALA_AUTODIFF_LINSOLVE_HPP_

#include <cmath>
#include <span>
#include <vector>

#include "coala/autodiff/dual.hpp"
#include "coala/util/errors.hpp"

namespace coala::autodiff {

// Solve A x = b by Gaussian elimination with partial pivoting. A is n x n,
// row-major, consumed by value. Works for double and for dual scalars, so
// derivatives flow through the elimination. Pivoting compares |value| only.
template <class T>
std::vector<T> solve_linear(std::vector<T> a, std::vector<T> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw UsageError("solve_linear: shape mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::abs(value_of(a[col * n + col]));
    for (std::size_t row = col + 1; row < n; ++row) {
      const double mag = std::abs(value_of(a[row * n + col]));
      if (mag > best) {
        best = mag;
        pivot = row;
      }
    }
    if (best == 0.0) throw NumericError("solve_linear: singular matrix");
    if (pivot != col) {
      for (std::size_t j = col; j < n; ++j)
        std::swap(a[col * n + j], a[pivot * n + j]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t row = col + 1; row < n; ++row) {
      const T factor = a[row * n + col] / a[col * n + col];
      for (std::size_t j = col + 1; j < n; ++j)
        a[row * n + j] -= factor * a[col * n + j];
      b[row] -= factor * b[col];
    }
  }
  std::vector<T> x(n, T(0.0));
  for (std::size_t ri = n; ri-- > 0;) {
    T acc = b[ri];
    for (std::size_t j = ri + 1; j < n; ++j) acc -= a[ri * n + j] * x[j];
    x[ri] = acc / a[ri * n + ri];
  }
  return x;
}

}  // namespace coala::autodiff

#endif  // COALA_AUTODIFF_LINSOLVE_HPP_
