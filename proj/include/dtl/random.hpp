#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dtl {

/// Seeded generator with a platform-independent draw contract.
///
/// std::mt19937_64 is fully specified by the standard, but the standard
/// distributions are not, so uniforms are built directly from the top 53 bits.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard exponential via inversion.
    double exponential() { return -std::log1p(-uniform()); }

    /// Uniform integer in [0, n).
    int index(int n) {
        int i = static_cast<int>(uniform() * n);
        return i < n ? i : n - 1;
    }

    std::uint64_t next() { return engine_(); }

  private:
    std::mt19937_64 engine_;
};

} // namespace dtl
