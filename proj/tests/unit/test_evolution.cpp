#include <doctest.h>

#include <cmath>

#include "ccqm/errors.hpp"
#include "ccqm/evolution.hpp"
#include "ccqm/lattice.hpp"
#include "ccqm/rng.hpp"
#include "ccqm/symmetry.hpp"
#include "oracles.hpp"

using namespace ccqm;

namespace {

double width_of(const ConfigField& f)
{
    const auto g = marginal_density(f, 0);
    const double dx = f.lattice.spacing();
    double m0 = 0, m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = f.lattice.coordinate(i);
        m0 += g[i] * dx;
        m1 += g[i] * x * dx;
        m2 += g[i] * x * x * dx;
    }
    m1 /= m0;
    return std::sqrt(m2 / m0 - m1 * m1);
}

HamiltonianSpec harmonic(double stiffness)
{
    HamiltonianSpec h;
    h.external.push_back(HarmonicPotential{stiffness, {}});
    return h;
}

} // namespace

TEST_CASE("free Gaussian spreads as the closed form")
{
    auto lat = oracle::line_lattice(1, 512, 60.0, 60.0 / 512, 1e-3);
    ConfigField f = product_state(lat, {oracle::gaussian_1d(lat, 0.0, 1.0)});
    HamiltonianSpec h;
    for (double t : {1.0, 4.0, 8.0}) {
        const auto g = evolve_until(f, h, t, 0.05);
        CHECK(g.time == doctest::Approx(t));
        CHECK(std::abs(width_of(g) / oracle::free_width(1.0, t) - 1.0) < 5e-3);
    }
}

TEST_CASE("mass and Planck constant enter through hbar / m")
{
    auto lat = oracle::line_lattice(1, 512, 60.0, 60.0 / 512, 1e-3);
    lat.particles[0].mass = 2.0;
    ConfigField f = product_state(lat, {oracle::gaussian_1d(lat, 0.0, 1.0)});
    HamiltonianSpec h;
    h.planck = 3.0 * kTwoPi;
    const auto g = evolve_until(f, h, 4.0, 0.05);
    CHECK(std::abs(width_of(g) / oracle::free_width(1.0, 4.0, 3.0, 2.0) - 1.0) < 5e-3);
}

TEST_CASE("zero time step is the identity")
{
    auto lat = oracle::line_lattice(1, 64, 10.0, 10.0 / 64, 1e-3);
    ConfigField f = product_state(lat, {oracle::gaussian_1d(lat, 1.0, 0.8, 2.0)});
    const auto g = step(f, harmonic(1.0), 0.0);
    CHECK(g.amplitudes == f.amplitudes);
}

TEST_CASE("propagation is linear and unitary")
{
    auto lat = oracle::line_lattice(1, 128, 20.0, 20.0 / 128, 1e-3);
    const auto h = harmonic(0.5);
    ConfigField a = product_state(lat, {oracle::gaussian_1d(lat, -2.0, 0.8, 1.0)});
    ConfigField b = product_state(lat, {oracle::gaussian_1d(lat, 3.0, 1.1, -0.5)});
    const Complex ca(0.3, -0.7), cb(1.2, 0.4);
    ConfigField mix = a;
    for (std::size_t i = 0; i < mix.amplitudes.size(); ++i)
        mix.amplitudes[i] = ca * a.amplitudes[i] + cb * b.amplitudes[i];

    Propagator p(lat, h, 0.01);
    for (int s = 0; s < 50; ++s) {
        p.step(a);
        p.step(b);
        p.step(mix);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < mix.amplitudes.size(); ++i)
        worst = std::max(worst, std::abs(mix.amplitudes[i] - ca * a.amplitudes[i] - cb * b.amplitudes[i]));
    CHECK(worst < 1e-12);
    CHECK(std::abs(norm_squared(a) - 1.0) < 1e-10);
}

TEST_CASE("harmonic ground state returns after one period")
{
    auto lat = oracle::line_lattice(1, 128, 16.0, 16.0 / 128, 1e-3);
    const double omega = 1.0;
    const double sigma = std::sqrt(0.5 / omega); // hbar = m = 1
    ConfigField f = product_state(lat, {oracle::gaussian_1d(lat, 0.0, sigma)});
    const double period = kTwoPi / omega;
    const auto g = evolve_until(f, harmonic(omega * omega), period, period / 8000.0);
    // After one period the state picks up exp(-i omega T / 2) = -1.
    double sum = 0.0;
    for (std::size_t i = 0; i < f.amplitudes.size(); ++i) sum += std::norm(g.amplitudes[i] + f.amplitudes[i]);
    CHECK(std::sqrt(sum / double(f.amplitudes.size())) < 1e-6);
}

TEST_CASE("energy is conserved for a coherent state")
{
    auto lat = oracle::line_lattice(1, 256, 24.0, 24.0 / 256, 1e-3);
    const auto h = harmonic(1.0);
    ConfigField f = product_state(lat, {oracle::gaussian_1d(lat, 2.0, std::sqrt(0.5))});
    const double e0 = energy(f, h);
    CHECK(e0 == doctest::Approx(0.5 + 0.5 * 4.0).epsilon(1e-6));
    const auto g = evolve_until(f, h, 3.0, 0.005);
    CHECK(std::abs(energy(g, h) - e0) / e0 < 1e-4);
}

TEST_CASE("pair potential tabulation matches a direct evaluation")
{
    auto lat = oracle::line_lattice(2, 16, 8.0, 0.5, 0.01);
    HamiltonianSpec h;
    PairInteraction p;
    p.kind = SoftCoulomb{2.0, 0.5};
    h.pairs.push_back(p);
    const auto v = tabulate_potential(lat, h);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) {
            const double r = std::abs(oracle::minimum_image(lat.coordinate(i) - lat.coordinate(j), 8.0));
            CHECK(v[i * 16 + j] == doctest::Approx(2.0 / std::sqrt(r * r + 0.25)).epsilon(1e-12));
        }
}

TEST_CASE("cutoff truncates pair interactions")
{
    PairInteraction p;
    p.kind = GaussianWell{1.0, 1.0};
    p.cutoff = 2.0;
    CHECK(p(1.0) == doctest::Approx(-std::exp(-0.5)));
    CHECK(p(2.5) == 0.0);
}

TEST_CASE("evolution keeps exchange antisymmetry with a pair interaction")
{
    auto lat = oracle::line_lattice(2, 64, 16.0, 0.25, 0.01, Statistics::fermion);
    ConfigField f = symmetrized_sum(product_state(
        lat, {oracle::gaussian_1d(lat, -1.5, 0.8, 0.5), oracle::gaussian_1d(lat, 1.5, 0.8, -0.5)}));
    normalize(f);
    HamiltonianSpec h;
    h.pairs.push_back(PairInteraction{0, 1, SoftCoulomb{1.0, 0.3}});
    const auto g = evolve_until(f, h, 1.0, 0.01);
    CHECK(exchange_residual(g) < 1e-12);
    CHECK(std::abs(norm_squared(g) - 1.0) < 1e-10);
}

TEST_CASE("hamiltonian validation catches bad pair indices")
{
    auto lat = oracle::line_lattice(1, 16, 4.0, 0.25, 0.01);
    HamiltonianSpec h;
    h.pairs.push_back(PairInteraction{0, 1, GaussianWell{}});
    CHECK_THROWS_AS(h.validate(lat), ConfigError);
}

TEST_CASE("restricting a hamiltonian renumbers pairs")
{
    HamiltonianSpec h;
    h.external = {NoPotential{}, HarmonicPotential{2.0, {}}, NoPotential{}};
    h.pairs.push_back(PairInteraction{0, 2, GaussianWell{}});
    h.pairs.push_back(PairInteraction{1, 2, GaussianWell{}});
    const auto r = h.restricted({2, 1});
    REQUIRE(r.pairs.size() == 1);
    CHECK(((r.pairs[0].first == 0 && r.pairs[0].second == 1) || (r.pairs[0].first == 1 && r.pairs[0].second == 0)));
    REQUIRE(r.external.size() == 2);
    CHECK(std::holds_alternative<HarmonicPotential>(r.external[1]));
}
