#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace seal {

/// SplitMix64 mixing step; used to derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derives a sub-seed for a named consumer so modules never share a stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Seeded generator with platform-independent distributions.
///
/// std::mt19937_64 output is fully specified by the standard, but the standard
/// distributions are not, so the draws below are computed by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n); n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = uniform_index(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace seal
