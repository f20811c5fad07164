#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace vitmri {

// Deterministic random stream shared by every randomized component.
//
// The core generator is std::mt19937_64, whose output sequence is fully
// specified by the C++ standard and therefore identical on every platform.
// Distributions are implemented here instead of using <random>'s, whose
// algorithms are implementation-defined and would break cross-platform
// reproducibility.
//
// Sub-streams are derived from (master_seed, purpose_tag, index) via
// SplitMix64 mixing, so independent pipeline stages never share a stream.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    static RngStream derive(std::uint64_t master, std::string_view purpose,
                            std::uint64_t index = 0);

    std::uint64_t next_u64() { return gen_(); }

    // Uniform real in [0, 1): top 53 bits scaled by 2^-53.
    double uniform();
    double uniform(double lo, double hi);

    // Unbiased integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller. One uniform pair per sample; the
    // second Box-Muller value is discarded to keep replay trivial.
    double normal();

    // N(0, sigma^2) with rejection outside cutoff_sigmas standard deviations.
    double truncated_normal(double sigma, double cutoff_sigmas);

    // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 boosted through
    // Gamma(shape + 1) * U^(1/shape).
    double gamma(double shape);

    double beta(double a, double b);

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace vitmri
