#include "coala/autodiff/dual.hpp"

#include <cmath>
#include <vector>

#include "coala/autodiff/linsolve.hpp"
#include "coala/util/rng.hpp"
#include "doctest.h"

using namespace coala;
using namespace coala::autodiff;

namespace {

template <class T>
T square_first(std::span<const T> x) {
  return x[0] * x[0];
}

}  // namespace

TEST_CASE("grad_forward on polynomial and sigmoid") {
  std::vector<double> x{3.0};
  auto g = grad_forward([](auto xs) { return xs[0] * xs[0]; },
                        std::span<const double>(x));
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-12));

  std::vector<double> zero{0.0};
  auto gs = grad_forward([](auto xs) { return sigmoid(xs[0]); },
                         std::span<const double>(zero));
  CHECK(gs[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("grad_forward handles inputs wider than the tangent block") {
  // f(x) = sum_i (i+1) * x_i^2, dimension 30 > kMaxTangents.
  Rng rng(7);
  std::vector<double> x(30);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  auto f = [](auto xs) {
    typename std::decay_t<decltype(xs)>::value_type acc(0.0);
    for (std::size_t i = 0; i < xs.size(); ++i)
      acc += (static_cast<double>(i) + 1.0) * xs[i] * xs[i];
    return acc;
  };
  auto g = grad_forward(f, std::span<const double>(x));
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(g[i] == doctest::Approx(2.0 * (i + 1.0) * x[i]).epsilon(1e-12));
}

TEST_CASE("grad_nested differentiates through an inner gradient") {
  // f(x) = d/dx (x^3) = 3x^2, so its derivative at 2 is 12.
  auto f = [](auto xs) {
    using T = typename std::decay_t<decltype(xs)>::value_type;
    std::vector<T> active(xs.begin(), xs.end());
    auto inner = inner_grad(
        [](auto ys) { return ys[0] * ys[0] * ys[0]; },
        std::span<const T>(active));
    return inner[0];
  };
  std::vector<double> x{2.0};
  auto g = grad_nested(f, std::span<const double>(x));
  CHECK(g[0] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("grad_nested: look-ahead toy objective") {
  // f(x, y) = y + eta * d/dy (x*y) = y + eta*x; df/dx = eta.
  const double eta = 0.3;
  auto f = [eta](auto xs) {
    using T = typename std::decay_t<decltype(xs)>::value_type;
    std::vector<T> y{xs[1]};
    const T x = xs[0];
    auto inner = inner_grad(
        [&x](auto ys) {
          using I = typename std::decay_t<decltype(ys)>::value_type;
          return I(x) * ys[0];
        },
        std::span<const T>(y));
    return xs[1] + eta * inner[0];
  };
  std::vector<double> xy{1.7, -0.4};
  auto g = grad_nested(f, std::span<const double>(xy));
  CHECK(g[0] == doctest::Approx(eta).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gradcheck reports tiny error on smooth functions") {
  std::vector<double> x{3.0};
  CHECK(gradcheck([](auto xs) { return xs[0] * xs[0]; },
                  std::span<const double>(x), 1e-4) < 1e-6);
  std::vector<double> zero{0.0};
  CHECK(gradcheck([](auto xs) { return sigmoid(xs[0]); },
                  std::span<const double>(zero), 1e-4) < 1e-6);
}

TEST_CASE("hessian of random smooth maps is symmetric") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));  // up to 10
    std::vector<double> x(n), w(n);
    for (auto& v : x) v = rng.uniform(-1.5, 1.5);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    auto f = [&w](auto xs) {
      using T = typename std::decay_t<decltype(xs)>::value_type;
      T acc(0.0);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        acc += w[i] * sigmoid(xs[i]);
        for (std::size_t j = 0; j < xs.size(); ++j)
          acc += 0.1 * w[i] * w[j] * xs[i] * xs[j];
      }
      T prod = exp(0.05 * acc);
      return prod + log(T(2.0) + sigmoid(acc));
    };
    auto h = hessian(f, std::span<const double>(x));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        CHECK(std::abs(h[i][j] - h[j][i]) < 1e-8);
  }
}

TEST_CASE("non-finite results are rejected") {
  std::vector<double> x{0.0};
  CHECK_THROWS_AS(grad_forward([](auto xs) { return log(xs[0]); },
                               std::span<const double>(x)),
                  NumericError);
}

TEST_CASE("solve_linear: identity and diagonal cases") {
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  std::vector<double> b{1.0, 2.0, 3.0, 4.0};
  auto x = solve_linear(eye, b);
  for (int i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(b[i]));

  std::vector<double> two{2.0, 0.0, 0.0, 2.0};
  std::vector<double> b2{2.0, 4.0};
  auto x2 = solve_linear(two, b2);
  CHECK(x2[0] == doctest::Approx(1.0));
  CHECK(x2[1] == doctest::Approx(2.0));
}

TEST_CASE("solve_linear: singular matrix rejected") {
  std::vector<double> a{1.0, 2.0, 2.0, 4.0};
  std::vector<double> b{1.0, 1.0};
  CHECK_THROWS_AS(solve_linear(a, b), NumericError);
}

TEST_CASE("solve_linear residual on random I - gamma M systems") {
  Rng rng(99);
  const double gamma = 0.95;
  for (int trial = 0; trial < 1000; ++trial) {
    // Random column-stochastic 4x4.
    std::vector<double> m(16);
    for (int col = 0; col < 4; ++col) {
      double total = 0.0;
      for (int row = 0; row < 4; ++row) {
        m[row * 4 + col] = rng.uniform(0.01, 1.0);
        total += m[row * 4 + col];
      }
      for (int row = 0; row < 4; ++row) m[row * 4 + col] /= total;
    }
    std::vector<double> a(16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        a[r * 4 + c] = (r == c ? 1.0 : 0.0) - gamma * m[r * 4 + c];
    std::vector<double> b(4);
    double bnorm = 0.0;
    for (auto& v : b) {
      v = rng.uniform(-2.0, 2.0);
      bnorm = std::max(bnorm, std::abs(v));
    }
    auto x = solve_linear(a, b);
    for (int r = 0; r < 4; ++r) {
      double res = -b[r];
      for (int c = 0; c < 4; ++c) res += a[r * 4 + c] * x[c];
      CHECK(std::abs(res) < 1e-10 * std::max(1.0, bnorm));
    }
  }
}

TEST_CASE("solve_linear flows derivatives through elimination") {
  // x solves (I - g*M(p)) x = b with M depending on p; compare dual result
  // against finite differences of x[0].
  auto solve_component = [](auto ps) ->
      typename std::decay_t<decltype(ps)>::value_type {
        using T = typename std::decay_t<decltype(ps)>::value_type;
        const T p = sigmoid(ps[0]);
        std::vector<T> a{T(1.0) - 0.9 * p, T(-0.3), T(0.2), T(1.0) - 0.9 * (T(1.0) - p)};
        std::vector<T> b{T(1.0), T(0.5)};
        auto x = solve_linear(a, b);
        return x[0];
      };
  std::vector<double> p{0.37};
  CHECK(gradcheck(solve_component, std::span<const double>(p), 1e-5) < 1e-8);
}
