#include "ccqm/rng.hpp"

#include <cmath>
#include <sstream>

#include "ccqm/errors.hpp"

namespace ccqm {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(seeded_engine(seed, stream))
{
}

RngStream RngStream::derive(std::uint64_t index) const
{
    // Mix the parent stream and child index so that derive() chains do not collide.
    std::uint64_t z = stream_ + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return RngStream(seed_, z);
}

double RngStream::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::exponential(double rate)
{
    return -std::log1p(-uniform()) / rate;
}

std::size_t RngStream::uniform_index(std::size_t n)
{
    auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
}

std::size_t RngStream::categorical(std::span<const double> weights)
{
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw ZeroSupportError("categorical draw over all-zero weights");

    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = i;
        if (u < acc) return i;
    }
    return last_positive;
}

std::string RngStream::state() const
{
    std::ostringstream os;
    os << seed_ << ' ' << stream_ << ' ' << engine_;
    return os.str();
}

void RngStream::restore(const std::string& state)
{
    std::istringstream is(state);
    is >> seed_ >> stream_ >> engine_;
    if (!is) throw ConfigError("malformed rng state");
}

} // namespace ccqm
