#pragma once

#include <cstdint>
#include <string_view>

namespace cpe {

// Small deterministic generator (splitmix64). Every stochastic step in the
// toy pipeline draws from a stream derived by hashing the run seed together
// with stable identifiers (round, query id, rollout index), so results do not
// depend on execution order or thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

constexpr std::uint64_t hash_u64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return hash_u64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

constexpr std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent stream for one (seed, label, index...) identity.
inline Rng derive_stream(std::uint64_t seed, std::string_view label,
                         std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = hash_combine(seed, hash_str(label));
  h = hash_combine(h, a);
  h = hash_combine(h, b);
  return Rng(h);
}

}  // namespace cpe
