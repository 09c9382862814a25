#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace ccqm {

/// Seeded random stream for one trajectory. Streams derived from the same
/// seed with different indices are statistically independent.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Child stream keyed by (seed, stream, index).
    RngStream derive(std::uint64_t index) const;

    /// Uniform on [0, 1).
    double uniform();
    /// Exponential waiting time with the given rate.
    double exponential(double rate);
    std::size_t uniform_index(std::size_t n);
    /// Index drawn with probability proportional to weights (inverse CDF).
    /// Throws ZeroSupportError when all weights are zero.
    std::size_t categorical(std::span<const double> weights);

    std::string state() const;
    void restore(const std::string& state);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

} // namespace ccqm
