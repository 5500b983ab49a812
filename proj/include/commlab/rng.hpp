#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace commlab {

// Stable 64-bit hashing and seed derivation. std::hash is not guaranteed
// stable across implementations, so artifacts that must be byte-identical
// derive every stream from these instead.

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from (base seed, label, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t h = fnv1a64(label);
  h = splitmix64(base ^ h);
  return splitmix64(h ^ fnv1a64_u64(index));
}

/// Seeded generator with portable bounded draws (std::uniform_int_distribution
/// is implementation-defined, so we roll our own rejection sampler).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Unbiased draw in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be > 0");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = eng_();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::mt19937_64 eng_;
};

/// k distinct values from {0..n-1} \ {exclude}, in draw order.
inline std::vector<int> sample_distinct(Rng& rng, int n, int k, int exclude = -1) {
  std::vector<int> pool;
  pool.reserve(n);
  for (int v = 0; v < n; ++v)
    if (v != exclude) pool.push_back(v);
  if (k < 0 || k > static_cast<int>(pool.size()))
    throw std::invalid_argument("sample_distinct: k out of range");
  std::vector<int> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const std::uint64_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace commlab
