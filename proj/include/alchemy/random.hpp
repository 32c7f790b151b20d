#pragma once

#include <cstdint>
#include <random>

namespace alchemy {

/// SplitMix64 finaliser. Used for seed derivation only.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-episode seed: splitmix64(base ^ splitmix64(index + 1)).
/// Stable across platforms and independent of evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 1));
}

/// Named sub-streams of one episode seed.
enum class Stream : std::uint64_t { environment = 0, agent = 1, model = 2 };

constexpr std::uint64_t stream_seed(std::uint64_t seed, Stream stream) {
  return splitmix64(seed ^ (0xA1C3E5F7ULL * (static_cast<std::uint64_t>(stream) + 1)));
}

/// Deterministic random stream. The distributions are implemented here rather
/// than taken from <random> so that draws are identical across standard
/// libraries (the engine itself is fully specified by the standard).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform integer in [0, n). n must be positive.
  std::uint32_t uniform_int(std::uint32_t n) {
    // Rejection sampling on the top 32 bits keeps the draw unbiased.
    const std::uint64_t limit = (std::uint64_t{1} << 32) - ((std::uint64_t{1} << 32) % n);
    for (;;) {
      const std::uint64_t r = engine_() >> 32;
      if (r < limit) return static_cast<std::uint32_t>(r % n);
    }
  }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace alchemy
