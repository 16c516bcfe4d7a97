#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hierfc {

/**
 * Counter-based generator: every draw is a pure function of
 * (seed, stream, counter), so results do not depend on which thread
 * consumes which stream.
 *
 * The output is the SplitMix64 finalizer applied to a key mixed from the
 * three words. Streams in use:
 *   - bootstrap: stream = kBootstrap ^ sample index, one counter per horizon block
 *   - permbu marginals: stream = kPermbuMarginal ^ (series * horizon + step)
 *   - permbu copula columns: stream = kPermbuCopula
 *   - synth: stream = kSynth ^ purpose-specific index
 */
class CounterRng {
public:
    static constexpr std::uint64_t kBootstrap = 0x0b00'0000'0000'0000ULL;
    static constexpr std::uint64_t kPermbuMarginal = 0x0c00'0000'0000'0000ULL;
    static constexpr std::uint64_t kPermbuCopula = 0x0d00'0000'0000'0000ULL;
    static constexpr std::uint64_t kSynth = 0x0e00'0000'0000'0000ULL;

    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix(seed ^ mix(stream + 0x9e37'79b9'7f4a'7c15ULL))) {}

    std::uint64_t next_u64() noexcept { return mix(key_ + 0x9e37'79b9'7f4a'7c15ULL * (++counter_)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const auto wide = static_cast<unsigned __int128>(next_u64()) * bound;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    /// Standard normal via Box-Muller; consumes two counters per call.
    double normal() noexcept {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) {
            u1 = 0x1.0p-53;
        }
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58'476d'1ce4'e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d0'49bb'1331'11ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace hierfc
