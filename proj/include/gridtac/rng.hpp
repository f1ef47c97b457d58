#pragma once

#include <cstdint>

namespace gridtac {

// SplitMix64. The standard distributions are implementation-defined, so
// every draw that ends up in a frame goes through these helpers to keep
// golden outputs identical across toolchains.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next()
  {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n)
  {
    // Lemire's multiply-shift; the tiny bias is irrelevant for image noise.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

private:
  std::uint64_t state_;
};

/// Derive an independent stream seed from a base seed and a tag (frame index etc).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag)
{
  Rng r(seed ^ (tag * 0xD1B54A32D192ED03ull));
  r.next();
  return r.next();
}

} // namespace gridtac
