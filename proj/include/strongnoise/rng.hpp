#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace strongnoise {

/// Master seed used by the acceptance suite and the CLI defaults.
inline constexpr std::uint64_t kDefaultSeed = 20190406ULL;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based generator: output k is a hash of (key, k). Satisfies
/// UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
public:
    using result_type = std::uint64_t;

    constexpr CounterRng() = default;
    constexpr explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), counter_(counter) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        return detail::splitmix64(key_ ^ detail::splitmix64(counter_++));
    }

    constexpr std::uint64_t key() const noexcept { return key_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// Independent stream for trajectory `index` of an ensemble seeded by `master`.
constexpr CounterRng make_stream(std::uint64_t master, std::uint64_t index) noexcept {
    return CounterRng(detail::splitmix64(master) ^ detail::splitmix64(~index + 0x632BE59BD9B4E019ULL));
}

/// Uniform on the open interval (0,1); never returns an endpoint.
inline double uniform_open(CounterRng& rng) noexcept {
    // 53 random mantissa bits, shifted by half an ulp away from zero.
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Source of Brownian increments sqrt(dt) * N(0,1) drawn from one stream.
class BrownianIncrements {
public:
    BrownianIncrements(CounterRng rng, double dt) : rng_(rng), scale_(std::sqrt(dt)) {}

    double operator()() { return scale_ * normal_(rng_); }
    double standard_normal() { return normal_(rng_); }

private:
    CounterRng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    double scale_;
};

}  // namespace strongnoise
