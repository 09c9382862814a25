#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ccqm/errors.hpp"
#include "ccqm/registry.hpp"
#include "ccqm/symmetry.hpp"
#include "oracles.hpp"

using namespace ccqm;

namespace {

LatticeSpec single(Statistics stats, std::size_t m = 64, double len = 32.0)
{
    return oracle::line_lattice(1, m, len, len / double(m) * 2.0, 0.05, stats);
}

ConfigField packet(const LatticeSpec& lat, double x0, double sigma)
{
    auto f = product_state(lat, {oracle::gaussian_1d(lat, x0, sigma)});
    normalize(f);
    return f;
}

/// E|V| under g1(x) g2(y) by a plain double loop.
double brute_interaction(const ConfigField& f1, const ConfigField& f2, const PairInteraction& v)
{
    const auto& lat = f1.lattice;
    const double dx = lat.spacing();
    double s = 0.0;
    for (std::size_t i = 0; i < lat.grid_points; ++i)
        for (std::size_t j = 0; j < lat.grid_points; ++j) {
            const double r = std::abs(oracle::minimum_image(lat.coordinate(i) - lat.coordinate(j), lat.domain_length));
            s += std::norm(f1.amplitudes[i]) * std::norm(f2.amplitudes[j]) * std::abs(v(r)) * dx * dx;
        }
    return s;
}

} // namespace

TEST_CASE("merge probability edge cases and quadrature oracle")
{
    const auto lat = single(Statistics::distinguishable);
    const auto a = packet(lat, -3.0, 1.0);
    const auto b = packet(lat, 2.0, 1.5);
    PairInteraction v{0, 1, GaussianWell{2.0, 1.5}};
    CHECK(merge_probability(a, b, {v}, 0.1, 0.0) == 0.0);

    const double i12 = brute_interaction(a, b, v);
    CHECK(cross_interaction(a, b, {v}) == doctest::Approx(i12).epsilon(1e-12));
    CHECK(merge_probability(a, b, {v}, 0.1, 3.0) == doctest::Approx(1.0 - std::exp(-3.0 * i12 * 0.1)).epsilon(1e-12));

    // Stronger interaction never lowers the probability.
    PairInteraction strong{0, 1, GaussianWell{4.0, 1.5}};
    CHECK(merge_probability(a, b, {strong}, 0.1, 3.0) >= merge_probability(a, b, {v}, 0.1, 3.0));

    // Disjoint supports with a finite-range interaction.
    auto c = ConfigField::zeros(lat);
    auto d = ConfigField::zeros(lat);
    c.amplitudes[0] = 1.0;
    d.amplitudes[32] = 1.0;
    PairInteraction shortrange{0, 1, GaussianWell{1.0, 1.0}, 2.0};
    CHECK(merge_probability(c, d, {shortrange}, 1.0, 5.0) == 0.0);
}

TEST_CASE("distinguishable merge is the literal product")
{
    const auto lat = single(Statistics::distinguishable);
    const auto a = packet(lat, -3.0, 1.0);
    const auto b = packet(lat, 2.0, 1.5);
    const auto m = merge(a, b);
    CHECK(m.lattice.particle_count() == 2);
    CHECK(m.lattice.base_magnitude == doctest::Approx(0.05 * 0.05));
    CHECK(norm_squared(symmetrized_product(a, b)) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 64; i += 7)
        for (std::size_t j = 0; j < 64; j += 5)
            CHECK(std::abs(m.amplitudes[i * 64 + j] - a.amplitudes[i] * b.amplitudes[j]) < 1e-14);
}

TEST_CASE("boson merge normalization matches the overlap formula")
{
    const auto lat = single(Statistics::boson, 256, 40.0);
    const double sigma = 1.0;
    for (double sep : {0.5, 2.0, 4.0}) {
        const auto a = packet(lat, -sep / 2, sigma);
        const auto b = packet(lat, sep / 2, sigma);
        const double s = std::exp(-sep * sep / (8.0 * sigma * sigma));
        // S psi1 psi2 is the sum of both orderings; its normalization
        // constant is 1 / sqrt(2 (1 + |s|^2)).
        const double numeric = 1.0 / std::sqrt(norm_squared(symmetrized_product(a, b)));
        CHECK(std::abs(numeric - 1.0 / std::sqrt(2.0 * (1.0 + s * s))) < 1e-8);
        CHECK(exchange_residual(merge(a, b)) < 1e-14);
    }
}

TEST_CASE("same-orbital fermion merge aborts")
{
    const auto lat = single(Statistics::fermion);
    const auto a = packet(lat, 0.0, 1.0);
    CHECK_THROWS_AS(merge(a, a), MergeAborted);
}

TEST_CASE("empty registry tick does nothing")
{
    Registry reg({}, HamiltonianSpec{}, 1);
    RngStream rng(1);
    tick(reg, 0.1, std::nullopt, CcqmParams{}, rng);
    CHECK(reg.wavefunctions().empty());
    CHECK(reg.events().empty());
}

TEST_CASE("unitary tick equals direct evolution")
{
    const auto lat = single(Statistics::distinguishable);
    const auto a = packet(lat, 1.0, 1.0);
    Registry reg({lat.particles[0]}, HamiltonianSpec{}, 3);
    reg.add(a, {0});
    RngStream rng(3);
    for (int s = 0; s < 10; ++s) tick(reg, 0.1, std::nullopt, std::nullopt, rng);
    const auto direct = evolve_until(a, HamiltonianSpec{}, 1.0, 0.1);
    CHECK(reg.time() == doctest::Approx(1.0));
    double worst = 0.0;
    for (std::size_t i = 0; i < direct.amplitudes.size(); ++i)
        worst = std::max(worst, std::abs(direct.amplitudes[i] - reg.wavefunctions()[0].field.amplitudes[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("registry rejects mismatched members")
{
    const auto lat = single(Statistics::distinguishable);
    Registry reg({lat.particles[0]}, HamiltonianSpec{}, 3);
    auto a = packet(lat, 1.0, 1.0);
    reg.add(a, {0});
    CHECK_THROWS_AS(reg.add(a, {0}), ConfigError);
    CHECK_THROWS_AS(reg.add(a, {1}), ConfigError);
}

TEST_CASE("merge then collapse conserves particles and logs in order")
{
    const auto lat = single(Statistics::distinguishable, 32, 16.0);
    std::vector<ParticleSpec> ps{lat.particles[0], lat.particles[0]};
    HamiltonianSpec h;
    h.pairs.push_back(PairInteraction{0, 1, GaussianWell{0.2, 2.0}});
    Registry reg(ps, h, 10);
    reg.merge_coefficient = 1e6;
    reg.add(packet(lat, -1.0, 1.5), {0});
    reg.add(packet(lat, 1.0, 1.5), {1});
    CcqmParams p;
    p.v_critical = 12;
    p.fraction = 0.5;
    RngStream rng(10);
    for (int s = 0; s < 5; ++s) {
        tick(reg, 0.05, std::nullopt, p, rng);
        CHECK(reg.particle_total() == 2);
        for (const auto& wf : reg.wavefunctions()) {
            CHECK(std::abs(norm_squared(wf.field) - 1.0) < 1e-9);
            CHECK(wf.field.time == doctest::Approx(reg.time()));
        }
    }
    const auto& ev = reg.events();
    REQUIRE(ev.size() >= 2);
    CHECK(ev[0].model == EventModel::merge);
    CHECK(ev[1].model == EventModel::ccqm_jump);
    CHECK(reg.wavefunctions().size() == 1);
}

TEST_CASE("oversized merges are deferred")
{
    const auto lat = single(Statistics::distinguishable, 32, 16.0);
    std::vector<ParticleSpec> ps{lat.particles[0], lat.particles[0]};
    HamiltonianSpec h;
    h.pairs.push_back(PairInteraction{0, 1, GaussianWell{1.0, 2.0}});
    Registry reg(ps, h, 10);
    reg.merge_coefficient = 1e6;
    reg.limits.max_particles = 1;
    reg.add(packet(lat, -1.0, 1.5), {0});
    reg.add(packet(lat, 1.0, 1.5), {1});
    CcqmParams p;
    p.v_critical = 1000;
    RngStream rng(10);
    tick(reg, 0.05, std::nullopt, p, rng);
    REQUIRE(reg.events().size() == 1);
    CHECK(reg.events()[0].model == EventModel::deferred_merge);
    CHECK(reg.wavefunctions().size() == 2);
}

TEST_CASE("grw tick applies scheduled hits")
{
    const auto lat = single(Statistics::distinguishable);
    Registry reg({lat.particles[0]}, HamiltonianSpec{}, 3);
    reg.add(packet(lat, 0.0, 2.0), {0});
    RngStream rng(3);
    GrwParams g{5.0, 1.0};
    for (int s = 0; s < 20; ++s) tick(reg, 0.1, g, std::nullopt, rng);
    CHECK(!reg.events().empty());
    double prev = 0.0;
    for (const auto& e : reg.events()) {
        CHECK(e.model == EventModel::grw);
        CHECK(e.time >= prev);
        CHECK(e.time <= 2.0 + 1e-12);
        prev = e.time;
    }
    CHECK(reg.wavefunctions()[0].field.time == doctest::Approx(2.0));
}

TEST_CASE("checkpoint round trip")
{
    const auto lat = single(Statistics::fermion);
    std::vector<ParticleSpec> ps{lat.particles[0], lat.particles[0]};
    Registry reg(ps, HamiltonianSpec{}, 21);
    reg.add(packet(lat, -2.0, 1.0), {0});
    reg.add(packet(lat, 2.0, 1.0), {1});
    RngStream rng(21);
    rng.uniform();
    const auto dir = std::filesystem::temp_directory_path() / "ccqm_checkpoint_test";
    std::filesystem::remove_all(dir);
    reg.write_checkpoint(dir, 1234, rng);
    auto [back, rng2] = Registry::read_checkpoint(dir, HamiltonianSpec{});
    REQUIRE(back.wavefunctions().size() == 2);
    CHECK(back.wavefunctions()[1].particles == std::vector<std::size_t>{1});
    CHECK(back.wavefunctions()[1].field.amplitudes == reg.wavefunctions()[1].field.amplitudes);
    CHECK(back.wavefunctions()[0].field.lattice.particles[0].statistics == Statistics::fermion);
    CHECK(rng2.uniform() == rng.uniform());
    std::filesystem::remove_all(dir);
}
