#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rica {

// splitmix64 finalizer, used to derive independent substream seeds from a
// root seed plus counters. Adding estimators or reordering work never
// perturbs another substream.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t root, std::uint64_t counter) {
  return mix64(root ^ mix64(counter));
}

inline std::uint64_t substream_seed(std::uint64_t root, std::uint64_t counter,
                                    std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the tag
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix64(root ^ mix64(counter) ^ h);
}

// Seeded uniform stream. All samplers consume randomness only through this
// class, so every draw sequence is reproducible from the seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  // uniform on (0,1); never returns 0 or 1
  double uniform() {
    const std::uint64_t bits = gen_() >> 11;  // 53 random bits
    double u = (static_cast<double>(bits) + 0.5) * 0x1p-53;
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (~0ULL) - (~0ULL) % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace rica
