// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace deid {

// PCG-XSH-RR 32. Standard-library distributions are implementation defined,
// so all randomized fixtures and the corpus generator go through this.
class Pcg32 {
public:
  explicit Pcg32(uint64_t seed, uint64_t seq = 0xda3e39cb94b95bdbULL) {
    state_ = 0;
    inc_ = (seq << 1u) | 1u;
    next();
    state_ += seed;
    next();
  }

  uint32_t next() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  // Uniform in [0, bound). bound == 0 is treated as full range.
  uint32_t bounded(uint32_t bound) {
    if (bound == 0) return next();
    uint32_t threshold = (-bound) % bound;
    for (;;) {
      uint32_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform integer in [lo, hi] inclusive.
  int range(int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(bounded(static_cast<uint32_t>(hi - lo + 1)));
  }

  // Uniform double in [0, 1).
  double uniform() { return next() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

private:
  uint64_t state_ = 0;
  uint64_t inc_ = 0;
};

}  // namespace deid
