#include "ccqm/ccqm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ccqm/errors.hpp"
#include "ccqm/symmetry.hpp"
#include "grid_walk.hpp"
#include "logging.hpp"

namespace ccqm {

void CcqmParams::validate() const
{
    if (v_critical < 2) throw ConfigError("ccqm.v_critical must be at least 2");
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("ccqm.fraction must lie in (0, 1)");
    if (!(split_coefficient >= 0.0)) throw ConfigError("ccqm.split_coefficient must be non-negative");
    if (!(split_base_probability >= 0.0 && split_base_probability <= 1.0))
        throw ConfigError("ccqm.split_base_probability must lie in [0, 1]");
    if (!(check_interval >= 0.0)) throw ConfigError("ccqm.check_interval must be non-negative");
}

bool check_critical(const ConfigField& field, const CcqmParams& params)
{
    return relative_volume(field) >= params.v_critical;
}

std::size_t target_volume(std::size_t v_before, double fraction)
{
    // nearbyint honours the default round-to-nearest-even mode.
    return static_cast<std::size_t>(std::nearbyint(fraction * static_cast<double>(v_before)));
}

namespace {

struct SignedPermutation {
    std::vector<std::size_t> center_of; // particle k takes center center_of[k]
    double sign = 1.0;
};

std::vector<SignedPermutation> jump_permutations(const std::vector<ParticleSpec>& particles,
                                                 JumpSymmetry symmetry)
{
    const auto groups = exchange_groups(particles);
    std::vector<std::vector<std::size_t>> orders(groups.begin(), groups.end());
    std::vector<SignedPermutation> out;
    while (true) {
        SignedPermutation sp;
        sp.center_of.resize(particles.size());
        std::iota(sp.center_of.begin(), sp.center_of.end(), 0);
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            for (std::size_t i = 0; i < groups[gi].size(); ++i) sp.center_of[groups[gi][i]] = orders[gi][i];
            if (symmetry == JumpSymmetry::statistics_signed &&
                particles[groups[gi][0]].statistics == Statistics::fermion) {
                // Parity via inversion count of the group's order.
                std::size_t inversions = 0;
                for (std::size_t a = 0; a < orders[gi].size(); ++a)
                    for (std::size_t b = a + 1; b < orders[gi].size(); ++b)
                        if (orders[gi][a] > orders[gi][b]) ++inversions;
                if (inversions % 2 == 1) sp.sign = -sp.sign;
            }
        }
        out.push_back(std::move(sp));
        std::size_t gi = 0;
        for (; gi < groups.size(); ++gi)
            if (std::next_permutation(orders[gi].begin(), orders[gi].end())) break;
        if (gi == groups.size()) break;
    }
    return out;
}

void check_centers(const LatticeSpec& lattice, const CenterSet& centers)
{
    if (centers.size() != lattice.particle_count()) throw ConfigError("need one center per particle");
    for (std::size_t k = 0; k < centers.size(); ++k)
        if (centers[k].size() != static_cast<std::size_t>(lattice.particles[k].spatial_dim))
            throw ConfigError("center " + std::to_string(k) + " has the wrong dimension");
}

/// Gaussian factor exp(-eps delta^2 / 2) for every min-image integer offset,
/// indexed by offset mod M.
std::vector<double> offset_table(const LatticeSpec& lat, double epsilon)
{
    const std::size_t m = lat.grid_points;
    std::vector<double> t(m);
    for (std::size_t o = 0; o < m; ++o) {
        const double delta = periodic_delta(static_cast<double>(o) * lat.spacing(), 0.0, lat.domain_length);
        t[o] = std::exp(-0.5 * epsilon * delta * delta);
    }
    return t;
}

} // namespace

std::vector<double> ccqm_jump_factor(const LatticeSpec& lattice, const CenterSet& centers,
                                     double epsilon, JumpSymmetry symmetry)
{
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
    lattice.validate();
    check_centers(lattice, centers);
    const std::size_t n = lattice.particle_count();
    const std::size_t m = lattice.grid_points;

    // table[j][d][i]: factor for center j's coordinate d at grid index i.
    const double axis_norm = std::pow(epsilon / std::numbers::pi, 0.25);
    std::vector<std::vector<std::vector<double>>> table(n);
    for (std::size_t j = 0; j < n; ++j) {
        table[j].resize(centers[j].size(), std::vector<double>(m));
        for (std::size_t d = 0; d < centers[j].size(); ++d)
            for (std::size_t i = 0; i < m; ++i) {
                const double delta = periodic_delta(lattice.coordinate(i), centers[j][d], lattice.domain_length);
                table[j][d][i] = axis_norm * std::exp(-0.5 * epsilon * delta * delta);
            }
    }

    const auto perms = jump_permutations(lattice.particles, symmetry);
    const double weight = 1.0 / static_cast<double>(perms.size());
    std::vector<std::size_t> offsets(n);
    for (std::size_t k = 0; k < n; ++k) offsets[k] = lattice.axis_offset(k);

    std::vector<double> factor(lattice.size());
    double peak = 0.0;
    detail::for_each_point(m, lattice.axes(), [&](std::size_t flat, const auto& idx) {
        double sum = 0.0;
        for (const auto& p : perms) {
            double term = p.sign;
            for (std::size_t k = 0; k < n; ++k) {
                const auto& t = table[p.center_of[k]];
                for (std::size_t d = 0; d < t.size(); ++d) term *= t[d][idx[offsets[k] + d]];
            }
            sum += term;
        }
        factor[flat] = weight * sum;
        peak = std::max(peak, std::abs(factor[flat]));
    });
    const double scale = std::pow(axis_norm, static_cast<double>(lattice.axes()));
    if (!(peak > 1e-14 * scale))
        throw DegenerateJumpError("antisymmetrized jump factor vanishes (coincident fermion centers)");
    return factor;
}

ConfigField apply_jump(const ConfigField& field, const CenterSet& centers, double epsilon)
{
    const auto factor = ccqm_jump_factor(field.lattice, centers, epsilon);
    ConfigField out = field;
    for (std::size_t i = 0; i < factor.size(); ++i) out.amplitudes[i] *= factor[i];
    if (!(norm_squared(out) > 1e-300)) throw ZeroSupportError("jump centered where the wavefunction vanishes");
    normalize(out);
    return out;
}

std::size_t post_jump_volume(const ConfigField& field, const CenterSet& centers, double epsilon)
{
    return relative_volume(apply_jump(field, centers, epsilon));
}

std::pair<double, double> epsilon_bracket(const LatticeSpec& lattice)
{
    const double dx = lattice.spacing();
    const double len = lattice.domain_length;
    return {1e-3 / (len * len), 16.0 / (dx * dx)};
}

EpsilonSolution solve_epsilon(const ConfigField& field, const CenterSet& centers, std::size_t target_v)
{
    const std::size_t v_before = relative_volume(field);
    if (target_v > v_before) throw ConfigError("epsilon target exceeds the current relative volume");

    EpsilonSolution best;
    long best_gap = -1;
    auto gap_of = [&](std::size_t v) {
        return std::abs(static_cast<long>(v) - static_cast<long>(target_v));
    };
    auto evaluate = [&](double eps) {
        std::size_t v = 0;
        try {
            v = post_jump_volume(field, centers, eps);
        } catch (const ZeroSupportError&) {
            v = 0;
        }
        ++best.evaluations;
        const long gap = gap_of(v);
        if (best_gap < 0 || gap < best_gap) {
            best_gap = gap;
            best.epsilon = eps;
            best.v_post = v;
        }
        return v;
    };

    auto [lo, hi] = epsilon_bracket(field.lattice);
    if (gap_of(evaluate(lo)) <= 1) {
        best.within_band = true;
        return best;
    }
    if (gap_of(evaluate(hi)) <= 1) {
        best.epsilon = hi;
        best.v_post = post_jump_volume(field, centers, hi);
        best.within_band = true;
        return best;
    }
    for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-12; ++it) {
        const double mid = std::sqrt(lo * hi);
        const std::size_t v = evaluate(mid);
        if (gap_of(v) <= 1) {
            best.epsilon = mid;
            best.v_post = v;
            best.within_band = true;
            return best;
        }
        if (v > target_v)
            lo = mid;
        else
            hi = mid;
    }
    log::warn("solve_epsilon: no epsilon reaches volume " + std::to_string(target_v) + " +/- 1; using " +
              std::to_string(best.v_post));
    return best;
}

double initial_epsilon_guess(const ConfigField& field, double fraction, std::size_t v_before)
{
    // Solve at the density maximum. A guess from the cell count alone
    // ignores how far the occupied region extends past the packet width
    // and can come out an order of magnitude too small, which spreads the
    // first center draw far into the tails.
    const auto& amp = field.amplitudes;
    const auto peak = std::max_element(amp.begin(), amp.end(),
                                       [](const Complex& x, const Complex& y) { return std::norm(x) < std::norm(y); });
    const auto centers = centers_of(field.lattice, static_cast<std::size_t>(peak - amp.begin()));
    return solve_epsilon(field, centers, target_volume(v_before, fraction)).epsilon;
}

CenterSet centers_of(const LatticeSpec& lattice, std::size_t flat_index)
{
    const GridIndexer grid(lattice.grid_points, lattice.axes());
    std::vector<std::size_t> idx(lattice.axes());
    grid.decode(flat_index, idx);
    CenterSet c(lattice.particle_count());
    for (std::size_t k = 0; k < c.size(); ++k) {
        const std::size_t off = lattice.axis_offset(k);
        for (int d = 0; d < lattice.particles[k].spatial_dim; ++d)
            c[k].push_back(lattice.coordinate(idx[off + static_cast<std::size_t>(d)]));
    }
    return c;
}

std::vector<double> ccqm_center_density(const ConfigField& field, double epsilon)
{
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    const auto& lat = field.lattice;
    const std::size_t m = lat.grid_points;
    const std::size_t axes = lat.axes();
    const std::size_t n = lat.particle_count();
    const GridIndexer grid(m, axes);

    // Gaussian reach in grid points: exp(-eps r^2 / 2) < 1e-16 beyond it.
    const double reach = 8.6 / (std::sqrt(epsilon) * lat.spacing());
    const bool full_axis = reach >= static_cast<double>(m) / 2.0 - 1.0;
    const long half = full_axis ? static_cast<long>(m / 2) : static_cast<long>(std::ceil(reach));
    const long lo_off = -half;
    const long hi_off = full_axis ? half - 1 : half; // inclusive

    // Candidates: occupied cells dilated by the reach on every axis.
    std::vector<char> candidate(lat.size(), 0);
    {
        const auto avg = cell_averages(field);
        std::vector<std::size_t> div(axes), cells(axes), cstride(axes);
        for (std::size_t a = 0; a < axes; ++a) {
            const std::size_t k = lat.particle_of_axis(a);
            div[a] = lat.cell_points(k);
            cells[a] = lat.cells_per_axis(k);
        }
        std::size_t s = 1;
        for (std::size_t a = axes; a-- > 0;) {
            cstride[a] = s;
            s *= cells[a];
        }
        bool any = false;
        detail::for_each_point(m, axes, [&](std::size_t flat, const auto& idx) {
            std::size_t c = 0;
            for (std::size_t a = 0; a < axes; ++a) c += (idx[a] / div[a]) * cstride[a];
            if (avg.magnitude[c] > lat.base_magnitude) {
                candidate[flat] = 1;
                any = true;
            }
        });
        if (!any || full_axis) {
            std::fill(candidate.begin(), candidate.end(), 1);
        } else {
            for (std::size_t a = 0; a < axes; ++a) {
                std::vector<char> next(candidate.size(), 0);
                const std::size_t stride = grid.stride(a);
                for (std::size_t flat = 0; flat < candidate.size(); ++flat) {
                    if (!candidate[flat]) continue;
                    const std::size_t x = (flat / stride) % m;
                    const std::size_t base = flat - x * stride;
                    for (long o = lo_off; o <= hi_off; ++o) {
                        const auto y = static_cast<std::size_t>((static_cast<long>(x) + o + static_cast<long>(m)) %
                                                                static_cast<long>(m));
                        next[base + y * stride] = 1;
                    }
                }
                candidate.swap(next);
            }
        }
    }

    const auto gauss = offset_table(lat, epsilon);
    const auto perms = jump_permutations(lat.particles, JumpSymmetry::exchange_symmetric);
    const double inv_perms = 1.0 / static_cast<double>(perms.size());
    std::vector<double> rho(lat.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(field.amplitudes[i]);

    // axis_source[p][a]: axis of the candidate index that centers axis a under perm p.
    std::vector<std::vector<std::size_t>> axis_source(perms.size(), std::vector<std::size_t>(axes));
    for (std::size_t pi = 0; pi < perms.size(); ++pi)
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t off = lat.axis_offset(k);
            const std::size_t src = lat.axis_offset(perms[pi].center_of[k]);
            for (int d = 0; d < lat.particles[k].spatial_dim; ++d)
                axis_source[pi][off + static_cast<std::size_t>(d)] = src + static_cast<std::size_t>(d);
        }

    const auto span = static_cast<std::size_t>(hi_off - lo_off + 1);
    const double norm_const =
        std::pow(epsilon / std::numbers::pi, 0.5 * static_cast<double>(axes)) * lat.cell_measure();

    std::vector<double> density(lat.size(), 0.0);
    std::vector<std::size_t> cidx(axes), x(axes), off(axes);
    for (std::size_t c = 0; c < lat.size(); ++c) {
        if (!candidate[c]) continue;
        grid.decode(c, cidx);
        double total = 0.0;
        for (std::size_t pi = 0; pi < perms.size(); ++pi) {
            // Walk the box around the permuted center.
            std::vector<std::size_t> center(axes);
            for (std::size_t a = 0; a < axes; ++a) center[a] = cidx[axis_source[pi][a]];
            std::fill(off.begin(), off.end(), 0);
            while (true) {
                std::size_t flat = 0;
                for (std::size_t a = 0; a < axes; ++a) {
                    const long o = lo_off + static_cast<long>(off[a]);
                    x[a] = static_cast<std::size_t>((static_cast<long>(center[a]) + o + static_cast<long>(m)) %
                                                    static_cast<long>(m));
                    flat += x[a] * grid.stride(a);
                }
                const double r = rho[flat];
                if (r != 0.0) {
                    double mult = 0.0;
                    double own = 0.0;
                    for (std::size_t si = 0; si < perms.size(); ++si) {
                        double t = 1.0;
                        for (std::size_t a = 0; a < axes; ++a)
                            t *= gauss[(x[a] + m - cidx[axis_source[si][a]]) % m];
                        mult += t;
                        if (si == pi) own = t;
                    }
                    total += own * mult * inv_perms * inv_perms * r;
                }
                std::size_t a = axes;
                while (a-- > 0) {
                    if (++off[a] < span) break;
                    off[a] = 0;
                }
                if (a == static_cast<std::size_t>(-1)) break;
            }
        }
        density[c] = total * norm_const;
    }
    return density;
}

SampledCenter sample_ccqm_center(const ConfigField& field, double epsilon, RngStream& rng)
{
    const auto density = ccqm_center_density(field, epsilon);
    SampledCenter s;
    s.flat_index = rng.categorical(density);
    s.centers = centers_of(field.lattice, s.flat_index);
    return s;
}

CollapseOutcome apply_ccqm_collapse(const ConfigField& field, const CcqmParams& params, RngStream& rng,
                                    std::optional<double> provisional_epsilon)
{
    params.validate();
    const std::size_t v_before = relative_volume(field);
    if (v_before < params.v_critical)
        throw ConfigError("collapse requested below the critical volume (v=" + std::to_string(v_before) + ")");
    const std::size_t target = target_volume(v_before, params.fraction);
    double eps_prov = provisional_epsilon.value_or(initial_epsilon_guess(field, params.fraction, v_before));

    constexpr int kMaxAttempts = 16;
    std::string last_error;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        try {
            auto center = sample_ccqm_center(field, eps_prov, rng);
            auto sol = solve_epsilon(field, center.centers, target);
            if (params.fixed_point_epsilon) {
                for (int it = 0; it < 20 && std::abs(sol.epsilon / eps_prov - 1.0) >= 0.05; ++it) {
                    eps_prov = sol.epsilon;
                    center = sample_ccqm_center(field, eps_prov, rng);
                    sol = solve_epsilon(field, center.centers, target);
                }
            }
            CollapseOutcome out{apply_jump(field, center.centers, sol.epsilon), {}, sol};
            out.event.time = field.time;
            out.event.model = EventModel::ccqm_jump;
            for (const auto& c : center.centers) out.event.center.insert(out.event.center.end(), c.begin(), c.end());
            out.event.width_param = sol.epsilon;
            out.event.v_before = v_before;
            out.event.v_after = relative_volume(out.field);
            out.event.seed = rng.seed();
            return out;
        } catch (const ZeroSupportError& e) {
            last_error = e.what();
        } catch (const DegenerateJumpError& e) {
            last_error = e.what();
        }
    }
    throw NumericError("ccqm collapse failed after " + std::to_string(kMaxAttempts) +
                       " center draws at t=" + std::to_string(field.time) + " (v=" + std::to_string(v_before) +
                       "): " + last_error);
}

double split_probability(double weight, const CcqmParams& params)
{
    if (params.split_coefficient <= 0.0) return 0.0;
    return params.split_base_probability * std::exp(-weight / params.split_coefficient);
}

SplitDecision decide_split(const ConfigField& field, const HamiltonianSpec& h, const CcqmParams& params,
                           RngStream& rng)
{
    const auto& lat = field.lattice;
    const std::size_t n = lat.particle_count();
    SplitDecision out;
    out.probability.assign(n, 0.0);
    out.flagged.assign(n, false);
    if (n < 2) {
        out.partition = {{0}};
        return out;
    }

    // Units that may leave: whole exchange groups, or lone particles.
    std::vector<std::vector<std::size_t>> units;
    std::vector<bool> grouped(n, false);
    for (auto& g : exchange_groups(lat.particles)) {
        for (auto k : g) grouped[k] = true;
        units.push_back(std::move(g));
    }
    for (std::size_t k = 0; k < n; ++k)
        if (!grouped[k]) units.push_back({k});
    std::sort(units.begin(), units.end());

    std::vector<std::vector<std::size_t>> blocks;
    std::vector<std::size_t> rest;
    for (const auto& u : units) {
        auto inside = [&](std::size_t k) { return std::find(u.begin(), u.end(), k) != u.end(); };
        double w = 0.0;
        for (const auto& p : h.pairs)
            if (inside(p.first) != inside(p.second)) w += pair_interaction_weight(field, p);
        const double p = split_probability(w, params);
        const bool flag = rng.uniform() < p;
        for (auto k : u) {
            out.probability[k] = p;
            out.flagged[k] = flag;
        }
        if (flag)
            blocks.push_back(u);
        else
            rest.insert(rest.end(), u.begin(), u.end());
    }
    if (!rest.empty()) {
        std::sort(rest.begin(), rest.end());
        blocks.push_back(std::move(rest));
    }
    std::sort(blocks.begin(), blocks.end());
    out.partition = std::move(blocks);
    return out;
}

LatticeSpec sub_lattice(const LatticeSpec& lattice, const std::vector<std::size_t>& particles)
{
    LatticeSpec sub;
    sub.grid_points = lattice.grid_points;
    sub.domain_length = lattice.domain_length;
    sub.base_phase = lattice.base_phase;
    std::size_t axes = 0;
    for (auto k : particles) {
        sub.particles.push_back(lattice.particles.at(k));
        sub.cell_lengths.push_back(lattice.cell_lengths.at(k));
        axes += static_cast<std::size_t>(lattice.particles[k].spatial_dim);
    }
    sub.base_magnitude = std::pow(lattice.base_magnitude,
                                  static_cast<double>(axes) / static_cast<double>(lattice.axes()));
    return sub;
}

namespace {

std::vector<std::size_t> axes_of(const LatticeSpec& lat, const std::vector<std::size_t>& particles)
{
    std::vector<std::size_t> axes;
    for (auto k : particles) {
        const std::size_t off = lat.axis_offset(k);
        for (int d = 0; d < lat.particles[k].spatial_dim; ++d) axes.push_back(off + static_cast<std::size_t>(d));
    }
    return axes;
}

} // namespace

std::vector<ConfigField> perform_split(const ConfigField& field,
                                       const std::vector<std::vector<std::size_t>>& partition)
{
    const auto& lat = field.lattice;
    const std::size_t n = lat.particle_count();
    if (partition.size() <= 1) return {field};

    std::vector<int> block_of(n, -1);
    for (std::size_t b = 0; b < partition.size(); ++b)
        for (auto k : partition[b]) {
            if (k >= n || block_of[k] != -1) throw ConfigError("partition is not a partition of the particles");
            block_of[k] = static_cast<int>(b);
        }
    if (std::find(block_of.begin(), block_of.end(), -1) != block_of.end())
        throw ConfigError("partition does not cover every particle");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (exchange_partners(lat.particles[i], lat.particles[j]) && block_of[i] != block_of[j]) {
                log::info("split aborted: identical particles would be separated");
                return {field};
            }

    const std::size_t m = lat.grid_points;
    const GridIndexer grid(m, lat.axes());
    std::vector<ConfigField> out;
    for (auto block : partition) {
        std::sort(block.begin(), block.end());
        std::vector<std::size_t> others;
        for (std::size_t k = 0; k < n; ++k)
            if (std::find(block.begin(), block.end(), k) == block.end()) others.push_back(k);
        const auto own_axes = axes_of(lat, block);
        const auto other_axes = axes_of(lat, others);

        // Mode of the companion particles' joint marginal.
        const GridIndexer other_grid(m, other_axes.size());
        std::vector<double> joint(other_grid.size(), 0.0);
        std::vector<std::size_t> idx(lat.axes());
        for (std::size_t flat = 0; flat < field.amplitudes.size(); ++flat) {
            grid.decode(flat, idx);
            std::size_t sub = 0;
            for (auto a : other_axes) sub = sub * m + idx[a];
            joint[sub] += std::norm(field.amplitudes[flat]);
        }
        const auto mode = static_cast<std::size_t>(std::max_element(joint.begin(), joint.end()) - joint.begin());
        std::vector<std::size_t> mode_idx(other_axes.size());
        other_grid.decode(mode, mode_idx);

        ConfigField piece = ConfigField::zeros(sub_lattice(lat, block), field.time);
        const GridIndexer own_grid(m, own_axes.size());
        std::vector<std::size_t> own_idx(own_axes.size());
        for (std::size_t a = 0; a < other_axes.size(); ++a) idx[other_axes[a]] = mode_idx[a];
        for (std::size_t s = 0; s < piece.amplitudes.size(); ++s) {
            own_grid.decode(s, own_idx);
            for (std::size_t a = 0; a < own_axes.size(); ++a) idx[own_axes[a]] = own_idx[a];
            piece.amplitudes[s] = field.amplitudes[grid.encode(idx)];
        }
        if (!(norm_squared(piece) > 1e-300)) {
            log::info("split aborted: conditioned block vanishes");
            return {field};
        }
        normalize(piece);
        out.push_back(std::move(piece));
    }
    return out;
}

} // namespace ccqm
