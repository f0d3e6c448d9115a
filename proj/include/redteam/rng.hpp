#pragma once

#include <cstddef>
#include <cstdint>

namespace redteam {

/// SplitMix64 generator. The stream is a pure function of the seed so every
/// replay (and any reimplementation in another language) sees the same draws.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) built from the top 53 bits.
    constexpr double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform index in [0, n). n must be positive.
    constexpr std::size_t below(std::size_t n) noexcept {
        return static_cast<std::size_t>(next() % static_cast<std::uint64_t>(n));
    }

    [[nodiscard]] constexpr std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

/// First output of a SplitMix64 stream seeded with `x`.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    Rng r(x);
    return r.next();
}

}  // namespace redteam
