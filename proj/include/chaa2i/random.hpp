#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace chaa2i {

/// Seeded random source whose transforms are written out explicitly.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard distributions are not, so uniform reals, normal
/// deviates and index sampling are implemented here with fixed conventions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random mantissa bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller, cosine branch only (one draw per pair).
    double normal();

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::size_t below(std::size_t n);

    /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
    std::vector<std::size_t> choose(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

/// Mixes a base seed with stream and index labels (SplitMix64 finalizer), so
/// that independent tasks draw from unrelated streams regardless of the order
/// in which they run.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

} // namespace chaa2i
