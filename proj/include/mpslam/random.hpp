#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mpslam {

/// Seeded pseudo-random stream. Draws are reproducible for a given seed on a
/// given build; distributions are the standard-library ones.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return normal_(engine_); }
    double normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }
    int poisson(double mean) { return mean > 0.0 ? std::poisson_distribution<int>(mean)(engine_) : 0; }
    bool bernoulli(double p) { return uniform() < p; }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Independent stream for (master seed, Monte-Carlo run, purpose). The three
/// inputs are mixed with SplitMix64 so that neighbouring seeds or runs do not
/// produce correlated engines.
RandomStream rng_stream(std::uint64_t master_seed, std::uint64_t run_index, std::string_view purpose);

}  // namespace mpslam
