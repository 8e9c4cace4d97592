#pragma once

// Small numeric helpers shared across modules.

#include <cmath>
#include <cstdint>

namespace gossim {

// Ceiling that forgives sub-epsilon floating point overshoot, so that an
// exact integer product computed in doubles (e.g. 0.05 * 980) never rounds up
// to the next integer.
inline std::int64_t ceil_eps(double x) {
  return static_cast<std::int64_t>(std::ceil(x - 1e-9));
}

// Exact integer ceil(a / b) for non-negative a, positive b.
inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

// FNV-1a over a byte-sized token stream; used for determinism fingerprints.
inline std::uint64_t fnv1a_init() { return 14695981039346656037ULL; }
inline void fnv1a_add(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (i * 8)) & 0xff;
    h *= 1099511628211ULL;
  }
}

}  // namespace gossim
