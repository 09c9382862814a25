#include "ccqm/grw.hpp"

#include <cmath>
#include <numbers>

#include "ccqm/errors.hpp"
#include "grid_walk.hpp"

namespace ccqm {

void GrwParams::validate() const
{
    if (!(lambda_rate > 0.0) || !std::isfinite(lambda_rate))
        throw ConfigError("grw.lambda must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("grw.alpha must be positive");
}

double mean_wait_time(double n_particles, double lambda_rate)
{
    return 1.0 / (n_particles * lambda_rate);
}

std::vector<ScheduledHit> sample_hit_schedule(std::size_t n_particles, double lambda_rate,
                                              double horizon, RngStream& rng)
{
    if (!(horizon > 0.0)) throw ConfigError("hit schedule horizon must be positive");
    if (!(lambda_rate > 0.0)) throw ConfigError("hit rate must be positive");
    std::vector<ScheduledHit> hits;
    if (n_particles == 0) return hits;
    const double total_rate = static_cast<double>(n_particles) * lambda_rate;
    double t = 0.0;
    while (true) {
        t += rng.exponential(total_rate);
        if (t > horizon) break;
        hits.push_back({t, rng.uniform_index(n_particles)});
    }
    return hits;
}

double gaussian_jump(double r_squared, double alpha, int dim)
{
    return std::pow(alpha / std::numbers::pi, 0.25 * dim) * std::exp(-0.5 * alpha * r_squared);
}

std::vector<double> grw_hit_density(const ConfigField& field, std::size_t k, double alpha)
{
    const auto& lat = field.lattice;
    const auto dim = static_cast<std::size_t>(lat.particles.at(k).spatial_dim);
    const std::size_t m = lat.grid_points;
    const double dx = lat.spacing();

    // j^2 factorizes per axis: sqrt(alpha/pi) exp(-alpha delta^2).
    std::vector<double> kernel(m);
    for (std::size_t o = 0; o < m; ++o) {
        const double delta = periodic_delta(static_cast<double>(o) * dx, 0.0, lat.domain_length);
        kernel[o] = std::sqrt(alpha / std::numbers::pi) * std::exp(-alpha * delta * delta) * dx;
    }

    std::vector<double> cur = marginal_density(field, k);
    std::vector<double> next(cur.size());
    const GridIndexer sub(m, dim);
    for (std::size_t axis = 0; axis < dim; ++axis) {
        const std::size_t stride = sub.stride(axis);
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t flat = 0; flat < cur.size(); ++flat) {
            const std::size_t x = (flat / stride) % m;
            const std::size_t base = flat - x * stride;
            double acc = 0.0;
            for (std::size_t y = 0; y < m; ++y) acc += kernel[(x + m - y) % m] * cur[base + y * stride];
            next[flat] = acc;
        }
        std::swap(cur, next);
    }
    return cur;
}

std::size_t sample_grw_center(const ConfigField& field, std::size_t k, double alpha, RngStream& rng)
{
    const auto p = grw_hit_density(field, k, alpha);
    return rng.categorical(p);
}

std::vector<double> subgrid_point(const LatticeSpec& lattice, int dim, std::size_t flat)
{
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int d = dim; d-- > 0;) {
        x[static_cast<std::size_t>(d)] = lattice.coordinate(flat % lattice.grid_points);
        flat /= lattice.grid_points;
    }
    return x;
}

ConfigField apply_grw_hit(const ConfigField& field, std::size_t k, const std::vector<double>& center,
                          double alpha)
{
    const auto& lat = field.lattice;
    if (k >= lat.particle_count()) throw ConfigError("particle index out of range");
    const int dim = lat.particles[k].spatial_dim;
    if (center.size() != static_cast<std::size_t>(dim)) throw ConfigError("hit center has wrong dimension");
    const std::size_t off = lat.axis_offset(k);

    // Per-axis factor tables, then one multiply per point.
    std::vector<std::vector<double>> axis_factor(static_cast<std::size_t>(dim),
                                                 std::vector<double>(lat.grid_points));
    const double norm_axis = std::pow(alpha / std::numbers::pi, 0.25);
    for (std::size_t d = 0; d < axis_factor.size(); ++d) {
        for (std::size_t i = 0; i < lat.grid_points; ++i) {
            const double delta = periodic_delta(center[d], lat.coordinate(i), lat.domain_length);
            axis_factor[d][i] = norm_axis * std::exp(-0.5 * alpha * delta * delta);
        }
    }
    ConfigField out = field;
    detail::for_each_point(lat.grid_points, lat.axes(), [&](std::size_t flat, const auto& idx) {
        double f = 1.0;
        for (std::size_t d = 0; d < axis_factor.size(); ++d) f *= axis_factor[d][idx[off + d]];
        out.amplitudes[flat] *= f;
    });
    if (!(norm_squared(out) > 1e-300))
        throw ZeroSupportError("GRW hit centered where the wavefunction vanishes");
    normalize(out);
    return out;
}

GrwHitResult grw_hit(const ConfigField& field, std::size_t k, double alpha, RngStream& rng)
{
    const auto& lat = field.lattice;
    const std::size_t idx = sample_grw_center(field, k, alpha, rng);
    const auto center = subgrid_point(lat, lat.particles[k].spatial_dim, idx);
    GrwHitResult r{apply_grw_hit(field, k, center, alpha), {}};
    r.event.time = field.time;
    r.event.model = EventModel::grw;
    r.event.particle_index = k;
    r.event.center = center;
    r.event.width_param = alpha;
    r.event.v_before = relative_volume(field);
    r.event.v_after = relative_volume(r.field);
    r.event.seed = rng.seed();
    return r;
}

} // namespace ccqm
