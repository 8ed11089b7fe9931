#ifndef COALA_ENV_ENV_HPP_
#define COALA_ENV_ENV_HPP_

#include <array>
#include <string>
#include <vector>

#include "coala/util/errors.hpp"

namespace coala::env {

enum class EnvKind { ipd, cleanup };

inline EnvKind env_kind_from_string(const std::string& s) {
  if (s == "ipd") return EnvKind::ipd;
  if (s == "cleanup") return EnvKind::cleanup;
  throw ConfigError("unknown env: " + s);
}

struct StepResult {
  std::array<std::vector<float>, 2> observations;
  std::array<double, 2> rewards{0.0, 0.0};
  bool done = false;
};

}  // namespace coala::env

#endif  // COALA_ENV_ENV_HPP_
