#pragma once

#include <cmath>
#include <cstdint>

namespace spatter {

__extension__ using uint128_t = unsigned __int128;

/// Deterministic 64-bit generator used by every simulator in the library.
///
/// State is seeded through one SplitMix64 step, then advanced with
/// xorshift64* (shifts 12, 25, 27; multiplier 0x2545F4914F6CDD1D). All
/// integer and uniform outputs are bit-exact on every platform; Gaussian
/// draws use the Marsaglia polar method and therefore depend on std::log
/// and std::sqrt.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z ^= z >> 31;
        state_ = z != 0 ? z : 0x2545F4914F6CDD1DULL;
    }

    std::uint64_t next_u64() noexcept {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
        if (hi <= lo) return lo;
        const auto range = static_cast<std::uint64_t>(hi - lo) + 1ULL;
        if (range == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit span
        const auto product = static_cast<uint128_t>(next_u64()) * range;
        return lo + static_cast<std::int64_t>(product >> 64);
    }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    double normal(double mean, double sigma) noexcept { return mean + sigma * normal(); }

    /// Independent stream derived from this seed and a stream id.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) noexcept {
        return Rng(seed ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace spatter
