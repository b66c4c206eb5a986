#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace graphik {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-based generator: the n-th draw of a stream is a pure function of
/// (key, n), so workers can read disjoint counter ranges of one stream and
/// still reproduce the sequential output exactly.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
        : key_(key), counter_(counter) {}

    /// Named substream of a user seed, e.g. substream(seed, "datagen-angles", config_id).
    static constexpr CounterRng substream(std::uint64_t seed, std::string_view name,
                                          std::uint64_t index = 0) noexcept {
        return CounterRng(splitmix64(splitmix64(seed ^ fnv1a64(name)) + index));
    }

    [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }
    [[nodiscard]] constexpr std::uint64_t counter() const noexcept { return counter_; }
    constexpr void seek(std::uint64_t counter) noexcept { counter_ = counter; }

    [[nodiscard]] constexpr std::uint64_t u64_at(std::uint64_t counter) const noexcept {
        return splitmix64(key_ + counter * 0xd1b54a32d192ed03ULL);
    }
    /// Uniform in [0, 1) with 53 random bits.
    [[nodiscard]] constexpr double uniform_at(std::uint64_t counter) const noexcept {
        return static_cast<double>(u64_at(counter) >> 11) * 0x1.0p-53;
    }

    constexpr std::uint64_t next_u64() noexcept { return u64_at(counter_++); }
    constexpr double uniform() noexcept { return uniform_at(counter_++); }
    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; consumes exactly two counters.
    double normal() noexcept {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n).
    constexpr std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace graphik
