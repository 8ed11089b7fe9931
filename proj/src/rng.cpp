#include "coala/util/rng.hpp"

#include <cmath>
#include <numbers>

#include "coala/util/errors.hpp"

namespace coala {

double Rng::normal() {
  // Box-Muller, discarding the second variate.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw NumericError("categorical: bad weight");
    total += w;
  }
  if (total <= 0.0) throw NumericError("categorical: zero total weight");
  double x = uniform() * total;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    x -= weights[i];
    if (x < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace coala
