#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ccqm/ccqm.hpp"
#include "ccqm/errors.hpp"
#include "ccqm/evolution.hpp"
#include "ccqm/symmetry.hpp"
#include "oracles.hpp"

using namespace ccqm;

namespace {

ConfigField pair_state(Statistics stats, std::size_t m = 32, double f0 = 0.02)
{
    auto lat = oracle::line_lattice(2, m, 16.0, 2.0 * 16.0 / double(m), f0, stats);
    ConfigField f = product_state(lat, {oracle::gaussian_1d(lat, -2.0, 1.5, 0.4), oracle::gaussian_1d(lat, 2.5, 1.2)});
    if (stats != Statistics::distinguishable) f = symmetrized_sum(f);
    normalize(f);
    return f;
}

ConfigField wide_packet(double sigma, std::size_t m = 256)
{
    auto lat = oracle::line_lattice(1, m, 64.0, 64.0 / double(m), 0.05);
    return product_state(lat, {oracle::gaussian_1d(lat, 0.0, sigma)});
}

/// |J_c psi|^2 dV with J_c the permutation-averaged Gaussian product, from
/// scratch for two 1D particles.
double brute_center_weight(const ConfigField& f, std::size_t c1, std::size_t c2, double eps, bool exchange)
{
    const auto& lat = f.lattice;
    const std::size_t m = lat.grid_points;
    auto j = [&](std::size_t x, std::size_t c) {
        const double d = oracle::minimum_image(lat.coordinate(x) - lat.coordinate(c), lat.domain_length);
        return std::pow(eps / std::numbers::pi, 0.25) * std::exp(-0.5 * eps * d * d);
    };
    double s = 0.0;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            double jf = j(a, c1) * j(b, c2);
            if (exchange) jf = 0.5 * (jf + j(a, c2) * j(b, c1));
            s += jf * jf * std::norm(f.amplitudes[a * m + b]);
        }
    return s * lat.cell_measure();
}

} // namespace

TEST_CASE("target volume rounds half to even")
{
    CHECK(target_volume(5, 0.5) == 2);
    CHECK(target_volume(7, 0.5) == 4);
    CHECK(target_volume(10, 0.5) == 5);
    CHECK(target_volume(100, 0.3) == 30);
}

TEST_CASE("parameters are validated")
{
    CcqmParams p;
    CHECK_NOTHROW(p.validate());
    p.fraction = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.v_critical = 1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.split_base_probability = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("jump factor is exchange symmetric for identical particles")
{
    const auto f = pair_state(Statistics::fermion);
    const auto& lat = f.lattice;
    const auto factor = ccqm_jump_factor(lat, {{-1.0}, {3.0}}, 0.5);
    const std::size_t m = lat.grid_points;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            CHECK(factor[a * m + b] == doctest::Approx(factor[b * m + a]).epsilon(1e-14));
}

TEST_CASE("signed jump factor vanishes for coincident fermion centers")
{
    const auto f = pair_state(Statistics::fermion);
    CHECK_THROWS_AS(ccqm_jump_factor(f.lattice, {{1.0}, {1.0}}, 0.5, JumpSymmetry::statistics_signed),
                    DegenerateJumpError);
    CHECK_NOTHROW(ccqm_jump_factor(f.lattice, {{1.0}, {1.0}}, 0.5));
    const auto signed_f = ccqm_jump_factor(f.lattice, {{-1.0}, {2.0}}, 0.5, JumpSymmetry::statistics_signed);
    const std::size_t m = f.lattice.grid_points;
    CHECK(signed_f[3 * m + 9] == doctest::Approx(-signed_f[9 * m + 3]));
}

TEST_CASE("distinguishable jump factor is the plain Gaussian product")
{
    const auto f = pair_state(Statistics::distinguishable);
    const auto& lat = f.lattice;
    const double eps = 0.8;
    const auto factor = ccqm_jump_factor(lat, {{-1.0}, {3.0}}, eps);
    const double norm = std::sqrt(eps / std::numbers::pi);
    const std::size_t m = lat.grid_points;
    for (std::size_t a = 0; a < m; a += 5)
        for (std::size_t b = 0; b < m; b += 3) {
            const double da = oracle::minimum_image(lat.coordinate(a) + 1.0, lat.domain_length);
            const double db = oracle::minimum_image(lat.coordinate(b) - 3.0, lat.domain_length);
            CHECK(factor[a * m + b] ==
                  doctest::Approx(norm * std::exp(-0.5 * eps * (da * da + db * db))).epsilon(1e-12));
        }
}

TEST_CASE("collapse keeps exchange symmetry")
{
    for (auto stats : {Statistics::fermion, Statistics::boson}) {
        const auto f = pair_state(stats);
        CcqmParams p;
        p.v_critical = 4;
        p.fraction = 0.5;
        RngStream rng(12);
        REQUIRE(relative_volume(f) >= p.v_critical);
        const auto out = apply_ccqm_collapse(f, p, rng);
        CHECK(exchange_residual(out.field) <= 1e-10);
        CHECK(norm_squared(out.field) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("center density matches a direct evaluation")
{
    for (auto stats : {Statistics::distinguishable, Statistics::boson}) {
        // Tiny f0 so that every non-negligible region counts as occupied.
        const auto f = pair_state(stats, 16, 1e-9);
        const bool exchange = stats == Statistics::boson;
        for (double eps : {0.05, 4.0}) {
            const auto dens = ccqm_center_density(f, eps);
            const std::size_t m = f.lattice.grid_points;
            double missed = 0.0, total = 0.0;
            for (std::size_t c1 = 0; c1 < m; ++c1)
                for (std::size_t c2 = 0; c2 < m; ++c2) {
                    const double ref = brute_center_weight(f, c1, c2, eps, exchange);
                    total += ref;
                    if (dens[c1 * m + c2] == 0.0)
                        missed += ref;
                    else
                        CHECK(dens[c1 * m + c2] == doctest::Approx(ref).epsilon(1e-9));
                }
            CHECK(missed <= 1e-9 * total);
        }
    }
}

TEST_CASE("sampled ccqm centers follow the center law")
{
    const auto f = pair_state(Statistics::distinguishable, 16, 0.01);
    const double eps = 0.3;
    const auto dens = ccqm_center_density(f, eps);
    double total = 0.0;
    for (double d : dens) total += d;
    std::vector<double> probs, counts(dens.size(), 0.0);
    for (double d : dens) probs.push_back(d / total);
    RngStream rng(77);
    for (int i = 0; i < 5000; ++i) counts[sample_ccqm_center(f, eps, rng).flat_index] += 1.0;
    CHECK(oracle::chi_square_p(counts, probs) > 0.001);
}

TEST_CASE("at fixed epsilon the expected post-jump marginal is the pre-jump marginal")
{
    // Exact enumeration over the center law, on a two-hump state.
    auto lat = oracle::line_lattice(1, 64, 32.0, 0.5, 0.05);
    auto f = product_state(lat, {oracle::gaussian_1d(lat, -4.0, 1.5, 0.5)});
    const auto other = oracle::gaussian_1d(lat, 5.0, 1.0);
    for (std::size_t i = 0; i < 64; ++i) f.amplitudes[i] += 0.7 * other[i];
    normalize(f);
    const double eps = 0.4;
    const auto law = ccqm_center_density(f, eps);
    double total = 0.0;
    for (double w : law) total += w;
    std::vector<double> mean(64, 0.0);
    for (std::size_t c = 0; c < 64; ++c) {
        if (law[c] == 0.0) continue;
        const auto g = marginal_density(apply_jump(f, centers_of(lat, c), eps), 0);
        for (std::size_t i = 0; i < 64; ++i) mean[i] += law[c] / total * g[i];
    }
    const auto pre = marginal_density(f, 0);
    double worst = 0.0;
    for (std::size_t i = 0; i < 64; ++i) worst = std::max(worst, std::abs(mean[i] - pre[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("epsilon solver succeeds whenever a scan finds the band")
{
    RngStream rng(5);
    for (double sigma : {4.0, 7.0}) {
        const auto f = wide_packet(sigma);
        const std::size_t v = relative_volume(f);
        const std::size_t target = target_volume(v, 0.5);
        for (int trial = 0; trial < 4; ++trial) {
            const double c = (rng.uniform() - 0.5) * sigma;
            const CenterSet centers{{c}};
            const auto [lo, hi] = epsilon_bracket(f.lattice);
            bool reachable = false;
            for (int i = 0; i < 200 && !reachable; ++i) {
                const double eps = lo * std::pow(hi / lo, i / 199.0);
                const long vp = static_cast<long>(post_jump_volume(f, centers, eps));
                reachable = std::abs(vp - static_cast<long>(target)) <= 1;
            }
            const auto sol = solve_epsilon(f, centers, target);
            if (reachable) {
                CHECK(sol.within_band);
                CHECK(std::abs(static_cast<long>(sol.v_post) - static_cast<long>(target)) <= 1);
            }
            CHECK(post_jump_volume(f, centers, sol.epsilon) == sol.v_post);
        }
    }
}

TEST_CASE("first-event epsilon meets the volume target at the density maximum")
{
    for (auto stats : {Statistics::distinguishable, Statistics::boson}) {
        const auto f = pair_state(stats);
        const std::size_t v = relative_volume(f);
        const std::size_t target = target_volume(v, 0.5);
        const double eps = initial_epsilon_guess(f, 0.5, v);
        std::size_t peak = 0;
        for (std::size_t i = 1; i < f.amplitudes.size(); ++i)
            if (std::norm(f.amplitudes[i]) > std::norm(f.amplitudes[peak])) peak = i;
        const auto got = static_cast<long>(post_jump_volume(f, centers_of(f.lattice, peak), eps));
        CHECK(std::abs(got - static_cast<long>(target)) <= 1);
    }
}

TEST_CASE("repeated collapses of a spreading packet honor the volume contract")
{
    auto f = wide_packet(1.0);
    CcqmParams p;
    p.v_critical = 24;
    p.fraction = 0.5;
    HamiltonianSpec h;
    Propagator prop(f.lattice, h, 0.05);
    RngStream rng(2024);
    std::optional<double> eps;
    int events = 0;
    for (int s = 0; s < 4000 && events < 40; ++s) {
        prop.step(f);
        f.time += 0.05;
        if (!check_critical(f, p)) continue;
        const auto out = apply_ccqm_collapse(f, p, rng, eps);
        eps = out.solution.epsilon;
        CHECK(out.event.v_before >= p.v_critical);
        const long target = static_cast<long>(target_volume(out.event.v_before, p.fraction));
        CHECK(std::abs(static_cast<long>(out.event.v_after) - target) <= 1);
        f = out.field;
        ++events;
    }
    CHECK(events == 40);
}

TEST_CASE("collapse below the critical volume is rejected")
{
    const auto f = wide_packet(0.5);
    CcqmParams p;
    p.v_critical = 1000;
    RngStream rng(1);
    CHECK_THROWS_AS(apply_ccqm_collapse(f, p, rng), ConfigError);
}

TEST_CASE("split probability and disabled splitting")
{
    CcqmParams p;
    p.split_base_probability = 0.4;
    p.split_coefficient = 2.0;
    CHECK(split_probability(0.0, p) == doctest::Approx(0.4));
    CHECK(split_probability(2.0, p) == doctest::Approx(0.4 * std::exp(-1.0)));
    p.split_coefficient = 0.0;
    CHECK(split_probability(0.0, p) == 0.0);

    const auto f = pair_state(Statistics::distinguishable);
    RngStream rng(4);
    const auto d = decide_split(f, HamiltonianSpec{}, p, rng);
    CHECK(d.trivial());
}

TEST_CASE("split flags follow Bernoulli rates")
{
    auto lat = oracle::line_lattice(3, 8, 8.0, 2.0, 0.01);
    ConfigField f = product_state(lat, {oracle::gaussian_1d(lat, -2, 1), oracle::gaussian_1d(lat, 0, 1),
                                         oracle::gaussian_1d(lat, 2, 1)});
    normalize(f);
    HamiltonianSpec h;
    h.pairs.push_back(PairInteraction{0, 1, GaussianWell{1.0, 1.0}});
    CcqmParams p;
    p.split_base_probability = 0.6;
    p.split_coefficient = 0.5;
    RngStream rng(99);
    const int trials = 4000;
    std::vector<double> flagged(3, 0.0);
    SplitDecision d;
    for (int t = 0; t < trials; ++t) {
        d = decide_split(f, h, p, rng);
        for (int k = 0; k < 3; ++k) flagged[k] += d.flagged[k] ? 1.0 : 0.0;
    }
    // Particle 2 has no partner: p = p0 exactly. Particles 0 and 1 see w > 0.
    CHECK(d.probability[2] == doctest::Approx(0.6));
    CHECK(d.probability[0] < 0.6);
    CHECK(d.probability[0] == doctest::Approx(d.probability[1]));
    const double w = pair_interaction_weight(f, h.pairs[0]);
    CHECK(d.probability[0] == doctest::Approx(0.6 * std::exp(-w / 0.5)));
    for (int k = 0; k < 3; ++k) {
        const double pk = d.probability[k];
        const double sd = std::sqrt(trials * pk * (1 - pk));
        CHECK(std::abs(flagged[k] - trials * pk) <= 3.0 * sd);
    }
}

TEST_CASE("identical particles split together or not at all")
{
    auto lat = oracle::line_lattice(3, 8, 8.0, 2.0, 0.01, Statistics::fermion);
    lat.particles[2].statistics = Statistics::distinguishable;
    ConfigField f = symmetrized_sum(product_state(
        lat, {oracle::gaussian_1d(lat, -2, 1), oracle::gaussian_1d(lat, 1, 1), oracle::gaussian_1d(lat, 2, 1)}));
    normalize(f);
    CcqmParams p;
    p.split_base_probability = 0.5;
    p.split_coefficient = 1.0;
    RngStream rng(8);
    for (int t = 0; t < 50; ++t) {
        const auto d = decide_split(f, HamiltonianSpec{}, p, rng);
        CHECK(d.flagged[0] == d.flagged[1]);
        for (const auto& block : d.partition) {
            const bool has0 = std::find(block.begin(), block.end(), 0) != block.end();
            const bool has1 = std::find(block.begin(), block.end(), 1) != block.end();
            CHECK(has0 == has1);
        }
    }
    const auto pieces = perform_split(f, {{0}, {1, 2}});
    CHECK(pieces.size() == 1);
}

TEST_CASE("splitting a near-product state recovers the factors")
{
    auto lat = oracle::line_lattice(2, 32, 16.0, 1.0, 0.01);
    const auto a = oracle::gaussian_1d(lat, -3.0, 1.0, 0.3);
    const auto b = oracle::gaussian_1d(lat, 2.0, 1.3);
    ConfigField f = product_state(lat, {a, b});
    // Small entangling admixture.
    const auto c = oracle::gaussian_1d(lat, 4.0, 0.8);
    const auto extra = product_state(lat, {c, a});
    for (std::size_t i = 0; i < f.amplitudes.size(); ++i) f.amplitudes[i] += 0.05 * extra.amplitudes[i];
    normalize(f);

    const auto pieces = perform_split(f, {{0}, {1}});
    REQUIRE(pieces.size() == 2);
    const double dx = lat.spacing();
    auto fidelity = [&](const ConfigField& piece, const std::vector<Complex>& orb) {
        Complex s = 0.0;
        for (std::size_t i = 0; i < orb.size(); ++i) s += std::conj(orb[i]) * piece.amplitudes[i] * dx;
        return std::norm(s);
    };
    CHECK(fidelity(pieces[0], a) > 0.95);
    CHECK(fidelity(pieces[1], b) > 0.95);
    for (const auto& p : pieces) CHECK(norm_squared(p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sub-lattice rescales f0 by the axis fraction")
{
    auto lat = oracle::line_lattice(3, 8, 8.0, 2.0, 0.001);
    const auto sub = sub_lattice(lat, {0, 2});
    CHECK(sub.particle_count() == 2);
    CHECK(sub.base_magnitude == doctest::Approx(0.01));
}
