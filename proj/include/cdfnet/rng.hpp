#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cdfnet {

// Deterministic random stream. All sampling goes through hand-rolled
// transforms of the raw 64-bit output so sequences do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 bits of randomness.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  /// Independent stream derived from a master seed and a stream tag.
  static std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cdfnet
