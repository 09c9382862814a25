#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ccqm/errors.hpp"
#include "ccqm/lattice.hpp"
#include "ccqm/rng.hpp"
#include "oracles.hpp"

using namespace ccqm;

namespace {

ConfigField flat_packet(const LatticeSpec& lat, std::size_t cells_wide)
{
    // Each particle uniform over `cells_wide` whole cells starting at index 0.
    std::vector<std::vector<Complex>> orb;
    for (std::size_t k = 0; k < lat.particle_count(); ++k) {
        std::vector<Complex> o(lat.grid_points, 0.0);
        const std::size_t pts = cells_wide * lat.cell_points(k);
        for (std::size_t i = 0; i < pts; ++i) o[i] = 1.0;
        orb.push_back(o);
    }
    return product_state(lat, orb);
}

} // namespace

TEST_CASE("lattice validation rejects malformed grids")
{
    auto lat = oracle::line_lattice(1, 64, 8.0, 0.5, 0.1);
    CHECK_NOTHROW(lat.validate());

    auto bad = lat;
    bad.grid_points = 48;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = lat;
    bad.cell_lengths[0] = 0.3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = lat;
    bad.cell_lengths[0] = 0.375; // 3 points, does not tile 64
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = lat;
    bad.base_magnitude = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = lat;
    bad.particles[0].mass = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = lat;
    bad.base_phase = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("relative volume matches direct cell loops")
{
    RngStream rng(17);
    for (std::size_t n : {1u, 2u}) {
        auto lat = oracle::line_lattice(n, 32, 4.0, n == 1 ? 0.5 : 0.25, 0.6);
        auto f = ConfigField::zeros(lat);
        for (auto& a : f.amplitudes) a = Complex(rng.uniform() - 0.3, rng.uniform() - 0.5);
        CHECK(relative_volume(f) == oracle::brute_volume(f));
        CHECK(quantize(f).occupied() == relative_volume(f));
    }
}

TEST_CASE("flat packets grow as v_s^N")
{
    for (std::size_t n = 1; n <= 3; ++n) {
        auto lat = oracle::line_lattice(n, 32, 4.0, 0.5, 0.5);
        auto f = flat_packet(lat, 8);
        std::size_t expect = 1;
        for (std::size_t k = 0; k < n; ++k) expect *= 8;
        CHECK(relative_volume(f) == expect);
    }
}

TEST_CASE("scaling the field by a positive constant never lowers the volume")
{
    RngStream rng(23);
    auto lat = oracle::line_lattice(1, 64, 8.0, 0.5, 0.4);
    auto f = ConfigField::zeros(lat);
    for (auto& a : f.amplitudes) a = Complex(rng.uniform(), rng.uniform());
    auto g = f;
    for (auto& a : g.amplitudes) a *= 1.7;
    CHECK(relative_volume(g) >= relative_volume(f));
}

TEST_CASE("cell average exactly at f0 is unoccupied")
{
    auto lat = oracle::line_lattice(1, 8, 8.0, 2.0, 1.0);
    auto f = ConfigField::zeros(lat);
    f.amplitudes[0] = 1.0;
    f.amplitudes[1] = 1.0;
    f.amplitudes[2] = 2.0;
    f.amplitudes[3] = 2.0;
    const auto q = quantize(f);
    CHECK(q.n_f[0] == 0);
    CHECK(q.n_f[1] == 2);
    CHECK(relative_volume(f) == 1);
}

TEST_CASE("cell phase is a circular mean")
{
    auto lat = oracle::line_lattice(1, 8, 8.0, 2.0, 0.01);
    auto f = ConfigField::zeros(lat);
    f.amplitudes[0] = std::polar(1.0, 0.1);
    f.amplitudes[1] = std::polar(1.0, kTwoPi - 0.1);
    f.amplitudes[2] = std::polar(1.0, 1.0);
    f.amplitudes[3] = std::polar(1.0, 1.2);
    const auto avg = cell_averages(f);
    CHECK(std::abs(std::remainder(avg.phase[0], kTwoPi)) < 1e-12);
    CHECK(avg.phase[1] == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(avg.phase[2] == 0.0);
    const auto q = quantize(f);
    CHECK(q.n_theta[1] == static_cast<std::uint32_t>(std::floor(1.1 / lat.base_phase)));
}

TEST_CASE("marginal density integrates to the norm and matches a direct sum")
{
    RngStream rng(31);
    auto lat = oracle::line_lattice(2, 16, 4.0, 0.25, 0.1);
    auto f = ConfigField::zeros(lat);
    for (auto& a : f.amplitudes) a = Complex(rng.uniform(), rng.uniform() - 0.5);
    normalize(f);
    const double dx = lat.spacing();
    for (std::size_t k = 0; k < 2; ++k) {
        const auto g = marginal_density(f, k);
        double total = 0.0;
        for (std::size_t i = 0; i < 16; ++i) {
            double direct = 0.0;
            for (std::size_t j = 0; j < 16; ++j)
                direct += std::norm(k == 0 ? f.amplitudes[i * 16 + j] : f.amplitudes[j * 16 + i]) * dx;
            CHECK(g[i] == doctest::Approx(direct).epsilon(1e-12));
            total += g[i] * dx;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("normalizing a zero field fails")
{
    auto lat = oracle::line_lattice(1, 16, 4.0, 0.25, 0.1);
    auto f = ConfigField::zeros(lat);
    CHECK_THROWS_AS(normalize(f), ZeroSupportError);
}

TEST_CASE("de Broglie cell length of a plane wave")
{
    auto lat = oracle::line_lattice(1, 128, 16.0, 0.125, 0.01);
    auto f = ConfigField::zeros(lat);
    const double k0 = kTwoPi * 4.0 / 16.0; // exact lattice mode
    for (std::size_t i = 0; i < 128; ++i) f.amplitudes[i] = std::polar(1.0, k0 * lat.coordinate(i));
    normalize(f);
    CHECK(mean_momentum_magnitude(f, 0) == doctest::Approx(k0).epsilon(1e-10));
    // wavelength 4.0 with hbar = 1, h = 2 pi
    CHECK(de_broglie_cell_length(f, 0, 1.0) == doctest::Approx(4.0));
    CHECK(de_broglie_cell_length(f, 0, 0.5) == doctest::Approx(2.0));
    // snapped down to a multiple of dx
    CHECK(de_broglie_cell_length(f, 0, 0.3) == doctest::Approx(1.125));
    CHECK(de_broglie_cell_length(f, 0, 1e-6) == doctest::Approx(lat.spacing()));
}

TEST_CASE("uniform field has no de Broglie length")
{
    auto lat = oracle::line_lattice(1, 32, 4.0, 0.125, 0.01);
    auto f = ConfigField::zeros(lat);
    for (auto& a : f.amplitudes) a = 1.0;
    CHECK_THROWS_AS(de_broglie_cell_length(f, 0, 1.0), DegenerateMomentumError);
}

TEST_CASE("periodic delta picks the minimum image")
{
    CHECK(periodic_delta(0.9, -0.9, 2.0) == doctest::Approx(-0.2));
    CHECK(periodic_delta(0.3, 0.1, 2.0) == doctest::Approx(0.2));
}

TEST_CASE("product state is the literal product")
{
    auto lat = oracle::line_lattice(2, 8, 2.0, 0.25, 0.1);
    std::vector<Complex> a(8), b(8);
    for (int i = 0; i < 8; ++i) {
        a[i] = Complex(i + 1, 0.5);
        b[i] = Complex(1.0, -i);
    }
    const auto f = product_state(lat, {a, b});
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) CHECK(f.amplitudes[i * 8 + j] == a[i] * b[j]);
}
