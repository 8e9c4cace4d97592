#pragma once

// Deterministic RNG utilities. Every random decision in the simulator flows
// through one of these helpers so that a (seed, salt) pair fully determines
// behavior across platforms and standard library implementations.

#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

namespace gossim {

// splitmix64: tiny, well-mixed generator used to derive independent stream
// seeds from a master seed. Distinct salts give uncorrelated streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t s = master ^ (0x6a09e667f3bcc909ULL + salt * 0x9e3779b97f4a7c15ULL);
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

// Wrapper around mt19937_64 with hand-rolled bounded draws and shuffling.
// std::uniform_int_distribution / std::shuffle are implementation-defined, so
// we avoid them everywhere determinism matters.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, n) by rejection sampling (unbiased).
  std::uint64_t bounded(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % n;
  }

  // Uniform double in [0, 1).
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n) rejected against a predicate. Caller
  // guarantees k does not exceed the eligible population.
  template <typename ExcludeFn>
  std::vector<std::uint32_t> sample_distinct(std::uint32_t n, std::size_t k,
                                             ExcludeFn excluded) {
    std::vector<std::uint32_t> out;
    out.reserve(k);
    if (k > 32) {
      std::unordered_set<std::uint32_t> taken;
      taken.reserve(k * 2);
      while (out.size() < k) {
        auto c = static_cast<std::uint32_t>(bounded(n));
        if (excluded(c) || !taken.insert(c).second) continue;
        out.push_back(c);
      }
      return out;
    }
    while (out.size() < k) {
      auto c = static_cast<std::uint32_t>(bounded(n));
      if (excluded(c)) continue;
      bool dup = false;
      for (auto p : out) {
        if (p == c) { dup = true; break; }
      }
      if (!dup) out.push_back(c);
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gossim
