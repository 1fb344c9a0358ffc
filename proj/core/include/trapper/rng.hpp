#pragma once

#include <cstdint>
#include <string_view>

namespace trapper {

// splitmix64; used both as a stream generator and to derive child seeds.
// Episode results must be bit-identical across platforms, so we avoid the
// implementation-defined std:: distributions entirely.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    // multiply-shift; bias is negligible for n << 2^64 and, more to the
    // point, identical everywhere.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  return h;
}

inline std::uint64_t hash_str(std::string_view s) {
  // FNV-1a
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace trapper
