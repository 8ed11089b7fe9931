#ifndef COALA_AUTODIFF_DUAL_HPP_
#define COALA_AUTODIFF_DUAL_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <type_traits>
#include <vector>

#include "coala/util/errors.hpp"

namespace coala::autodiff {

// Maximum number of simultaneous directional derivatives carried inline.
// Wider gradients are computed in blocks (see grad_forward).
inline constexpr int kMaxTangents = 12;

// Forward-mode dual number over scalar S. S = double gives first
// derivatives; S = DualT<double> tracks a second level, used when an
// expression contains an inner gradient (see inner_grad).
//
// Tangent slots above k are unused; mixed-width operands combine to
// k = max(ka, kb) with missing tangents treated as zero, so plain
// constants never allocate tangent work.
template <class S>
struct DualT {
  S v{};
  int k = 0;
  std::array<S, kMaxTangents> t{};

  DualT() = default;
  DualT(double c) : v(c) {}  // NOLINT: implicit promotion of constants
  template <class U = S,
            std::enable_if_t<!std::is_same_v<U, double>, int> = 0>
  DualT(const S& s) : v(s) {}  // NOLINT
};

using Dual = DualT<double>;
using NestedDual = DualT<Dual>;

template <class S>
struct nesting_depth : std::integral_constant<int, 0> {};
template <class S>
struct nesting_depth<DualT<S>>
    : std::integral_constant<int, 1 + nesting_depth<S>::value> {};

// --- plain-scalar access --------------------------------------------------

inline double value_of(double x) { return x; }
template <class S>
double value_of(const DualT<S>& x) {
  return value_of(x.v);
}

inline bool all_finite(double x) { return std::isfinite(x); }
template <class S>
bool all_finite(const DualT<S>& x) {
  if (!all_finite(x.v)) return false;
  for (int i = 0; i < x.k; ++i)
    if (!all_finite(x.t[i])) return false;
  return true;
}

// --- arithmetic -----------------------------------------------------------

template <class S>
DualT<S> operator+(const DualT<S>& a, const DualT<S>& b) {
  DualT<S> r;
  r.v = a.v + b.v;
  r.k = a.k > b.k ? a.k : b.k;
  for (int i = 0; i < r.k; ++i) {
    if (i < a.k && i < b.k)
      r.t[i] = a.t[i] + b.t[i];
    else if (i < a.k)
      r.t[i] = a.t[i];
    else
      r.t[i] = b.t[i];
  }
  return r;
}

template <class S>
DualT<S> operator-(const DualT<S>& a, const DualT<S>& b) {
  DualT<S> r;
  r.v = a.v - b.v;
  r.k = a.k > b.k ? a.k : b.k;
  for (int i = 0; i < r.k; ++i) {
    if (i < a.k && i < b.k)
      r.t[i] = a.t[i] - b.t[i];
    else if (i < a.k)
      r.t[i] = a.t[i];
    else
      r.t[i] = S(0.0) - b.t[i];
  }
  return r;
}

template <class S>
DualT<S> operator-(const DualT<S>& a) {
  DualT<S> r;
  r.v = S(0.0) - a.v;
  r.k = a.k;
  for (int i = 0; i < r.k; ++i) r.t[i] = S(0.0) - a.t[i];
  return r;
}

template <class S>
DualT<S> operator*(const DualT<S>& a, const DualT<S>& b) {
  DualT<S> r;
  r.v = a.v * b.v;
  r.k = a.k > b.k ? a.k : b.k;
  for (int i = 0; i < r.k; ++i) {
    if (i < a.k && i < b.k)
      r.t[i] = a.t[i] * b.v + a.v * b.t[i];
    else if (i < a.k)
      r.t[i] = a.t[i] * b.v;
    else
      r.t[i] = a.v * b.t[i];
  }
  return r;
}

template <class S>
DualT<S> operator/(const DualT<S>& a, const DualT<S>& b) {
  DualT<S> r;
  r.v = a.v / b.v;
  r.k = a.k > b.k ? a.k : b.k;
  for (int i = 0; i < r.k; ++i) {
    if (i < a.k && i < b.k)
      r.t[i] = (a.t[i] - r.v * b.t[i]) / b.v;
    else if (i < a.k)
      r.t[i] = a.t[i] / b.v;
    else
      r.t[i] = (S(0.0) - r.v * b.t[i]) / b.v;
  }
  return r;
}

// Mixed dual/constant forms, so expressions like 1.0 - x avoid widening.
template <class S>
DualT<S> operator+(const DualT<S>& a, double c) {
  DualT<S> r = a;
  r.v = a.v + c;
  return r;
}
template <class S>
DualT<S> operator+(double c, const DualT<S>& a) {
  return a + c;
}
template <class S>
DualT<S> operator-(const DualT<S>& a, double c) {
  return a + (-c);
}
template <class S>
DualT<S> operator-(double c, const DualT<S>& a) {
  DualT<S> r = -a;
  r.v = c - a.v;
  return r;
}
template <class S>
DualT<S> operator*(const DualT<S>& a, double c) {
  DualT<S> r;
  r.v = a.v * c;
  r.k = a.k;
  for (int i = 0; i < r.k; ++i) r.t[i] = a.t[i] * c;
  return r;
}
template <class S>
DualT<S> operator*(double c, const DualT<S>& a) {
  return a * c;
}
template <class S>
DualT<S> operator/(const DualT<S>& a, double c) {
  return a * (1.0 / c);
}
template <class S>
DualT<S> operator/(double c, const DualT<S>& a) {
  return DualT<S>(c) / a;
}

template <class S>
DualT<S>& operator+=(DualT<S>& a, const DualT<S>& b) {
  a = a + b;
  return a;
}
template <class S>
DualT<S>& operator-=(DualT<S>& a, const DualT<S>& b) {
  a = a - b;
  return a;
}
template <class S>
DualT<S>& operator*=(DualT<S>& a, const DualT<S>& b) {
  a = a * b;
  return a;
}

// Value-ordering only (pivot selection, feasibility checks).
template <class S>
bool operator<(const DualT<S>& a, const DualT<S>& b) {
  return value_of(a) < value_of(b);
}
template <class S>
bool operator>(const DualT<S>& a, const DualT<S>& b) {
  return value_of(a) > value_of(b);
}

// --- elementary functions ---------------------------------------------------

using std::exp;
using std::log;

template <class S>
DualT<S> exp(const DualT<S>& a) {
  DualT<S> r;
  r.v = exp(a.v);
  r.k = a.k;
  for (int i = 0; i < r.k; ++i) r.t[i] = r.v * a.t[i];
  return r;
}

template <class S>
DualT<S> log(const DualT<S>& a) {
  DualT<S> r;
  r.v = log(a.v);
  r.k = a.k;
  for (int i = 0; i < r.k; ++i) r.t[i] = a.t[i] / a.v;
  return r;
}

inline double sigmoid(double x) {
  // Split on sign for stability at large |x|.
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class S>
DualT<S> sigmoid(const DualT<S>& a) {
  DualT<S> r;
  r.v = sigmoid(a.v);  // resolves to the double overload or recurses
  r.k = a.k;
  const S slope = r.v * (S(1.0) - r.v);
  for (int i = 0; i < r.k; ++i) r.t[i] = slope * a.t[i];
  return r;
}

// --- gradient drivers -------------------------------------------------------

// Gradient of a scalar map by forward accumulation. f must be callable as
// T f(std::span<const T>) for T = DualT<S>; inputs wider than kMaxTangents
// are processed in tangent blocks. Throws NumericError if the result or any
// tangent is non-finite.
template <class S, class F>
std::vector<S> grad_forward_scalar(F&& f, std::span<const S> x) {
  static_assert(nesting_depth<DualT<S>>::value <= 2,
                "differentiation nesting deeper than 2 is not supported");
  const int n = static_cast<int>(x.size());
  std::vector<S> grad(n);
  std::vector<DualT<S>> xd(n);
  for (int i = 0; i < n; ++i) xd[i] = DualT<S>(x[i]);
  for (int base = 0; base < n; base += kMaxTangents) {
    const int width = std::min(kMaxTangents, n - base);
    for (int i = 0; i < n; ++i) xd[i].k = 0;
    for (int j = 0; j < width; ++j) {
      xd[base + j].k = width;
      for (int jj = 0; jj < width; ++jj)
        xd[base + j].t[jj] = S(jj == j ? 1.0 : 0.0);
    }
    // All seeded inputs share the block width.
    for (int i = 0; i < n; ++i)
      if (xd[i].k == 0) {
        xd[i].k = width;
        for (int jj = 0; jj < width; ++jj) xd[i].t[jj] = S(0.0);
      }
    DualT<S> y = f(std::span<const DualT<S>>(xd));
    if (!all_finite(y))
      throw NumericError("grad_forward: non-finite result");
    for (int j = 0; j < width; ++j)
      grad[base + j] = j < y.k ? y.t[j] : S(0.0);
  }
  return grad;
}

// First derivatives of f at x. f is a generic callable instantiated at
// T = Dual here (and at T = double by finite-difference checkers).
template <class F>
std::vector<double> grad_forward(F&& f, std::span<const double> x) {
  return grad_forward_scalar<double>(std::forward<F>(f), x);
}

// As grad_forward, but f may itself contain one inner_grad level
// (derivatives of expressions that contain derivatives).
template <class F>
std::vector<double> grad_nested(F&& f, std::span<const double> x) {
  return grad_forward_scalar<double>(std::forward<F>(f), x);
}

// Plain first-level gradient; the double overload lets templated code call
// inner_grad uniformly whether or not an outer differentiation is active.
template <class G>
std::vector<double> inner_grad(G&& g, std::span<const double> active) {
  return grad_forward_scalar<double>(std::forward<G>(g), active);
}

// Gradient of g w.r.t. active arguments while carrying any outer tangents
// in S through. Used inside functions differentiated by grad_nested.
template <class S, class G>
std::vector<DualT<S>> inner_grad(G&& g, std::span<const DualT<S>> active) {
  static_assert(nesting_depth<DualT<DualT<S>>>::value <= 2,
                "differentiation nesting deeper than 2 is not supported");
  using Inner = DualT<DualT<S>>;
  const int n = static_cast<int>(active.size());
  std::vector<DualT<S>> grad(n);
  std::vector<Inner> xd(n);
  for (int i = 0; i < n; ++i) xd[i] = Inner(active[i]);
  for (int base = 0; base < n; base += kMaxTangents) {
    const int width = std::min(kMaxTangents, n - base);
    for (int i = 0; i < n; ++i) {
      xd[i].k = width;
      for (int jj = 0; jj < width; ++jj) xd[i].t[jj] = DualT<S>(0.0);
    }
    for (int j = 0; j < width; ++j) xd[base + j].t[j] = DualT<S>(1.0);
    Inner y = g(std::span<const Inner>(xd));
    if (!all_finite(y)) throw NumericError("inner_grad: non-finite result");
    for (int j = 0; j < width; ++j)
      grad[base + j] = j < y.k ? y.t[j] : DualT<S>(0.0);
  }
  return grad;
}

// Max relative error between the forward-mode gradient and central finite
// differences: max_i |analytic_i - numeric_i| / max(1, |numeric_i|).
// Reports only; never asserts.
template <class F>
double gradcheck(F&& f, std::span<const double> x, double h) {
  std::vector<double> analytic = grad_nested(f, x);
  std::vector<double> xs(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double orig = xs[i];
    xs[i] = orig + h;
    const double fp = value_of(f(std::span<const double>(xs)));
    xs[i] = orig - h;
    const double fm = value_of(f(std::span<const double>(xs)));
    xs[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

// Same report against an externally supplied analytic gradient (reverse
// mode, hand-derived, ...). f is evaluated at plain double.
template <class F>
double gradcheck_against(std::span<const double> analytic, F&& f,
                         std::span<const double> x, double h) {
  std::vector<double> xs(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double orig = xs[i];
    xs[i] = orig + h;
    const double fp = f(std::span<const double>(xs));
    xs[i] = orig - h;
    const double fm = f(std::span<const double>(xs));
    xs[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

// Dense Hessian via one nested sweep: row i holds d/dx_i of the inner
// gradient.
template <class F>
std::vector<std::vector<double>> hessian(F&& f, std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    auto fi = [&](std::span<const Dual> xd) -> Dual {
      std::vector<Dual> copy(xd.begin(), xd.end());
      auto g = inner_grad<double>(f, std::span<const Dual>(copy));
      return g[i];
    };
    std::vector<double> row = grad_forward(fi, x);
    h[i] = std::move(row);
  }
  return h;
}

}  // namespace coala::autodiff

#endif  // COALA_AUTODIFF_DUAL_HPP_
