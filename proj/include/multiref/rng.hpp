#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace multiref {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream seed for a (seed, a, b) coordinate: each component is folded in
/// through one SplitMix64 round, so nearby coordinates give unrelated seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ splitmix64(a + 0x632BE59BD9B4E019ULL));
  h = splitmix64(h ^ splitmix64(b + 0x85157AF5ULL));
  return h;
}

/// Seeded generator with platform-independent derived variates.
///
/// std::mt19937_64's raw output is fixed by the standard, but the standard
/// distributions are not, so uniforms are built directly from the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Standard exponential; Dirichlet(1) rows are normalized exponentials.
  double exponential() { return -std::log1p(-uniform()); }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace multiref
