#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace lpft {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: the n-th draw of stream (seed, stream) is a pure
/// function of (seed, stream, n). Monte-Carlo trials each get their own stream,
/// so results do not depend on evaluation order or thread count.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t bits_at(std::uint64_t n) const noexcept { return mix64(key_ ^ mix64(n)); }

    /// Uniform in the open interval (0, 1).
    double uniform_at(std::uint64_t n) const noexcept {
        return (static_cast<double>(bits_at(n) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Two independent standard normals from draw pair n (Box-Muller).
    std::pair<double, double> normal_pair_at(std::uint64_t n) const noexcept {
        const double u1 = uniform_at(2 * n);
        const double u2 = uniform_at(2 * n + 1);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    // Sequential interface over the same counter space.
    double uniform() noexcept { return uniform_at(counter_++); }
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        auto [a, b] = normal_pair_at(pair_counter_++);
        spare_ = b;
        has_spare_ = true;
        return a;
    }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    // Normals use a disjoint half of the counter space from uniform().
    std::uint64_t pair_counter_ = std::uint64_t{1} << 62;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lpft
