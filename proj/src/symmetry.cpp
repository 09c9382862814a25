#include "ccqm/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccqm/errors.hpp"
#include "grid_walk.hpp"

namespace ccqm {

std::vector<std::vector<std::size_t>> exchange_groups(const std::vector<ParticleSpec>& particles)
{
    std::vector<std::vector<std::size_t>> groups;
    std::vector<bool> used(particles.size(), false);
    for (std::size_t i = 0; i < particles.size(); ++i) {
        if (used[i]) continue;
        std::vector<std::size_t> g{i};
        for (std::size_t j = i + 1; j < particles.size(); ++j) {
            if (!used[j] && exchange_partners(particles[i], particles[j])) {
                g.push_back(j);
                used[j] = true;
            }
        }
        if (g.size() > 1) groups.push_back(std::move(g));
    }
    return groups;
}

ConfigField permute_particles(const ConfigField& field, const std::vector<std::size_t>& perm)
{
    const auto& lat = field.lattice;
    const std::size_t n = lat.particle_count();
    if (perm.size() != n) throw ConfigError("permutation size mismatch");
    for (std::size_t j = 0; j < n; ++j) {
        if (perm[j] >= n || lat.particles[j].spatial_dim != lat.particles[perm[j]].spatial_dim)
            throw ConfigError("permutation mixes particles of different dimension");
    }
    std::vector<std::size_t> offsets(n);
    for (std::size_t k = 0; k < n; ++k) offsets[k] = lat.axis_offset(k);
    const GridIndexer grid = field.indexer();

    ConfigField out = field;
    std::vector<std::size_t> src(lat.axes());
    detail::for_each_point(lat.grid_points, lat.axes(), [&](std::size_t flat, const auto& idx) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto dim = static_cast<std::size_t>(lat.particles[j].spatial_dim);
            for (std::size_t d = 0; d < dim; ++d) src[offsets[j] + d] = idx[offsets[perm[j]] + d];
        }
        out.amplitudes[flat] = field.amplitudes[grid.encode(src)];
    });
    return out;
}

namespace {

int permutation_sign(const std::vector<std::size_t>& p)
{
    int sign = 1;
    std::vector<bool> seen(p.size(), false);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (seen[i]) continue;
        std::size_t len = 0;
        for (std::size_t j = i; !seen[j]; j = p[j]) {
            seen[j] = true;
            ++len;
        }
        if (len % 2 == 0) sign = -sign;
    }
    return sign;
}

} // namespace

ConfigField symmetrized_sum(const ConfigField& field)
{
    const auto& lat = field.lattice;
    const auto groups = exchange_groups(lat.particles);
    if (groups.empty()) return field;

    // Odometer over one permutation per group.
    std::vector<std::vector<std::size_t>> orders;
    for (const auto& g : groups) orders.push_back(g);

    ConfigField acc = field;
    std::fill(acc.amplitudes.begin(), acc.amplitudes.end(), Complex{});
    while (true) {
        std::vector<std::size_t> perm(lat.particle_count());
        std::iota(perm.begin(), perm.end(), 0);
        int sign = 1;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            std::vector<std::size_t> local(groups[gi].size());
            for (std::size_t i = 0; i < groups[gi].size(); ++i) {
                perm[groups[gi][i]] = orders[gi][i];
                local[i] = static_cast<std::size_t>(
                    std::find(groups[gi].begin(), groups[gi].end(), orders[gi][i]) - groups[gi].begin());
            }
            if (lat.particles[groups[gi][0]].statistics == Statistics::fermion)
                sign *= permutation_sign(local);
        }
        const ConfigField term = permute_particles(field, perm);
        for (std::size_t i = 0; i < acc.amplitudes.size(); ++i)
            acc.amplitudes[i] += static_cast<double>(sign) * term.amplitudes[i];

        std::size_t gi = 0;
        for (; gi < groups.size(); ++gi) {
            if (std::next_permutation(orders[gi].begin(), orders[gi].end())) break;
        }
        if (gi == groups.size()) break;
    }
    return acc;
}

double exchange_residual(const ConfigField& field)
{
    const auto& lat = field.lattice;
    double worst = 0.0;
    for (const auto& g : exchange_groups(lat.particles)) {
        const double s = lat.particles[g[0]].statistics == Statistics::fermion ? -1.0 : 1.0;
        for (std::size_t a = 0; a < g.size(); ++a) {
            for (std::size_t b = a + 1; b < g.size(); ++b) {
                std::vector<std::size_t> perm(lat.particle_count());
                std::iota(perm.begin(), perm.end(), 0);
                std::swap(perm[g[a]], perm[g[b]]);
                const ConfigField swapped = permute_particles(field, perm);
                double r = 0.0;
                for (std::size_t i = 0; i < field.amplitudes.size(); ++i)
                    r += std::norm(field.amplitudes[i] - s * swapped.amplitudes[i]);
                worst = std::max(worst, std::sqrt(r * lat.cell_measure()));
            }
        }
    }
    return worst;
}

} // namespace ccqm
