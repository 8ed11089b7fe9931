#ifndef COALA_UTIL_RNG_HPP_
#define COALA_UTIL_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace coala {

// Counter-free splitmix64 step, used both as a generator core and to hash
// stream identifiers. Reductions over parallel units stay deterministic
// because every unit derives its own stream from (seed, ids...) instead of
// sharing a sequential generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** — small, fast, well-studied. Seeded via splitmix64 so that
// nearby stream ids give unrelated sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // Derive an independent stream from a root seed and a list of ids
  // (iteration, agent index, element index, role tag, ...).
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = seed ^ 0xd1b54a32d192ed03ULL;
    for (std::uint64_t id : ids) {
      h ^= id + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      std::uint64_t tmp = h;
      h = splitmix64(tmp);
    }
    return Rng(h);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1). 53-bit mantissa; identical across platforms.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (no cached spare: keeps streams
  // stateless w.r.t. call parity).
  double normal();

  // Index sampled from unnormalized non-negative weights.
  int categorical(std::span<const double> weights);

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace coala

#endif  // COALA_UTIL_RNG_HPP_
