#include "ccqm/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "ccqm/errors.hpp"
#include "fft.hpp"
#include "grid_walk.hpp"

namespace ccqm {

std::string to_string(Statistics s)
{
    switch (s) {
    case Statistics::boson: return "boson";
    case Statistics::fermion: return "fermion";
    case Statistics::distinguishable: return "distinguishable";
    }
    return "distinguishable";
}

Statistics statistics_from_string(const std::string& s)
{
    if (s == "boson") return Statistics::boson;
    if (s == "fermion") return Statistics::fermion;
    if (s == "distinguishable") return Statistics::distinguishable;
    throw ConfigError("unknown statistics '" + s + "'");
}

bool identical(const ParticleSpec& a, const ParticleSpec& b)
{
    return a.species == b.species && a.statistics == b.statistics && a.mass == b.mass &&
           a.spatial_dim == b.spatial_dim;
}

bool exchange_partners(const ParticleSpec& a, const ParticleSpec& b)
{
    return identical(a, b) && a.statistics != Statistics::distinguishable;
}

namespace {

bool near_integer(double x, double tol = 1e-9)
{
    return std::abs(x - std::round(x)) <= tol * std::max(1.0, std::abs(x));
}

} // namespace

void LatticeSpec::validate() const
{
    if (particles.empty()) throw ConfigError("lattice has no particles");
    for (std::size_t k = 0; k < particles.size(); ++k) {
        const auto& p = particles[k];
        if (!(p.mass > 0.0) || !std::isfinite(p.mass))
            throw ConfigError("particle " + std::to_string(k) + ": mass must be positive");
        if (p.spatial_dim < 1 || p.spatial_dim > 3)
            throw ConfigError("particle " + std::to_string(k) + ": spatial_dim must be 1, 2 or 3");
    }
    if (grid_points < 2 || (grid_points & (grid_points - 1)) != 0)
        throw ConfigError("grid_points must be a power of two >= 2");
    if (!(domain_length > 0.0) || !std::isfinite(domain_length))
        throw ConfigError("domain_length must be positive");
    if (axes() > 12) throw ConfigError("too many configuration-space axes");
    double total = 1.0;
    for (std::size_t a = 0; a < axes(); ++a) total *= static_cast<double>(grid_points);
    if (total > static_cast<double>(std::size_t{1} << 31))
        throw ConfigError("configuration grid exceeds 2^31 points");

    if (cell_lengths.size() != particles.size())
        throw ConfigError("need one cell_length per particle");
    const double dx = spacing();
    for (std::size_t k = 0; k < cell_lengths.size(); ++k) {
        const double ratio = cell_lengths[k] / dx;
        const std::string who = "particle " + std::to_string(k) + ": ";
        if (!std::isfinite(ratio) || ratio < 1.0 - 1e-9)
            throw ConfigError(who + "cell_length must be at least the grid spacing");
        if (!near_integer(ratio))
            throw ConfigError(who + "cell_length is not a whole number of grid spacings");
        const auto c = static_cast<std::size_t>(std::llround(ratio));
        if (grid_points % c != 0)
            throw ConfigError(who + "cells do not tile the grid (M not divisible by a/dx)");
    }
    if (!(base_magnitude > 0.0) || !std::isfinite(base_magnitude))
        throw ConfigError("base_magnitude must be positive");
    if (!(base_phase > 0.0) || !(base_phase < kTwoPi))
        throw ConfigError("base_phase must lie in (0, 2 pi)");
    if (!near_integer(kTwoPi / base_phase))
        throw ConfigError("base_phase must divide 2 pi into whole steps");
}

std::size_t LatticeSpec::axes() const
{
    std::size_t d = 0;
    for (const auto& p : particles) d += static_cast<std::size_t>(p.spatial_dim);
    return d;
}

std::size_t LatticeSpec::size() const
{
    std::size_t n = 1;
    for (std::size_t a = 0; a < axes(); ++a) n *= grid_points;
    return n;
}

double LatticeSpec::cell_measure() const
{
    return std::pow(spacing(), static_cast<double>(axes()));
}

std::size_t LatticeSpec::axis_offset(std::size_t k) const
{
    std::size_t off = 0;
    for (std::size_t j = 0; j < k; ++j) off += static_cast<std::size_t>(particles[j].spatial_dim);
    return off;
}

std::size_t LatticeSpec::particle_of_axis(std::size_t axis) const
{
    std::size_t off = 0;
    for (std::size_t k = 0; k < particles.size(); ++k) {
        off += static_cast<std::size_t>(particles[k].spatial_dim);
        if (axis < off) return k;
    }
    throw ConfigError("axis out of range");
}

std::size_t LatticeSpec::cell_points(std::size_t k) const
{
    return static_cast<std::size_t>(std::llround(cell_lengths.at(k) / spacing()));
}

std::size_t LatticeSpec::cells_per_axis(std::size_t k) const
{
    return grid_points / cell_points(k);
}

std::size_t LatticeSpec::cell_count() const
{
    std::size_t n = 1;
    for (std::size_t k = 0; k < particles.size(); ++k)
        for (int d = 0; d < particles[k].spatial_dim; ++d) n *= cells_per_axis(k);
    return n;
}

double LatticeSpec::coordinate(std::size_t i) const
{
    return -0.5 * domain_length + static_cast<double>(i) * spacing();
}

std::size_t LatticeSpec::phase_steps() const
{
    return static_cast<std::size_t>(std::llround(kTwoPi / base_phase));
}

GridIndexer::GridIndexer(std::size_t points_per_axis, std::size_t axes)
    : points_(points_per_axis), axes_(axes), size_(1), strides_(axes)
{
    for (std::size_t a = axes; a-- > 0;) {
        strides_[a] = size_;
        size_ *= points_per_axis;
    }
}

void GridIndexer::decode(std::size_t flat, std::span<std::size_t> index) const
{
    for (std::size_t a = axes_; a-- > 0;) {
        index[a] = flat % points_;
        flat /= points_;
    }
}

std::size_t GridIndexer::encode(std::span<const std::size_t> index) const
{
    std::size_t flat = 0;
    for (std::size_t a = 0; a < axes_; ++a) flat += index[a] * strides_[a];
    return flat;
}

ConfigField ConfigField::zeros(LatticeSpec lattice, double time)
{
    lattice.validate();
    ConfigField f;
    f.amplitudes.assign(lattice.size(), Complex{});
    f.lattice = std::move(lattice);
    f.time = time;
    return f;
}

std::size_t DiscreteField::occupied() const
{
    return static_cast<std::size_t>(std::count_if(n_f.begin(), n_f.end(), [](auto n) { return n > 0; }));
}

double norm_squared(const ConfigField& field)
{
    double s = 0.0;
    for (const auto& z : field.amplitudes) s += std::norm(z);
    return s * field.lattice.cell_measure();
}

void normalize(ConfigField& field)
{
    const double n2 = norm_squared(field);
    if (!(n2 > 1e-300) || !std::isfinite(n2))
        throw ZeroSupportError("cannot normalize a vanishing field");
    const double scale = 1.0 / std::sqrt(n2);
    for (auto& z : field.amplitudes) z *= scale;
}

Complex inner_product(const ConfigField& a, const ConfigField& b)
{
    if (a.amplitudes.size() != b.amplitudes.size())
        throw ConfigError("inner product of fields with different shapes");
    Complex s{};
    for (std::size_t i = 0; i < a.amplitudes.size(); ++i)
        s += std::conj(a.amplitudes[i]) * b.amplitudes[i];
    return s * a.lattice.cell_measure();
}

ConfigField product_state(const LatticeSpec& lattice,
                          const std::vector<std::vector<Complex>>& orbitals, double time)
{
    ConfigField field = ConfigField::zeros(lattice, time);
    const std::size_t n = lattice.particle_count();
    if (orbitals.size() != n) throw ConfigError("need one orbital per particle");
    std::vector<std::size_t> offsets(n), dims(n);
    for (std::size_t k = 0; k < n; ++k) {
        offsets[k] = lattice.axis_offset(k);
        dims[k] = static_cast<std::size_t>(lattice.particles[k].spatial_dim);
        std::size_t expect = 1;
        for (std::size_t d = 0; d < dims[k]; ++d) expect *= lattice.grid_points;
        if (orbitals[k].size() != expect)
            throw ConfigError("orbital " + std::to_string(k) + " has the wrong size");
    }
    const std::size_t m = lattice.grid_points;
    detail::for_each_point(m, lattice.axes(), [&](std::size_t flat, const auto& idx) {
        Complex v{1.0, 0.0};
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t sub = 0;
            for (std::size_t d = 0; d < dims[k]; ++d) sub = sub * m + idx[offsets[k] + d];
            v *= orbitals[k][sub];
        }
        field.amplitudes[flat] = v;
    });
    return field;
}

namespace {

/// Flat cell index per grid point, cells row-major in axis order.
std::vector<std::size_t> cell_map(const LatticeSpec& lattice)
{
    const std::size_t axes = lattice.axes();
    std::vector<std::size_t> div(axes), cells(axes), stride(axes);
    for (std::size_t a = 0; a < axes; ++a) {
        const std::size_t k = lattice.particle_of_axis(a);
        div[a] = lattice.cell_points(k);
        cells[a] = lattice.cells_per_axis(k);
    }
    std::size_t s = 1;
    for (std::size_t a = axes; a-- > 0;) {
        stride[a] = s;
        s *= cells[a];
    }
    std::vector<std::size_t> map(lattice.size());
    detail::for_each_point(lattice.grid_points, axes, [&](std::size_t flat, const auto& idx) {
        std::size_t c = 0;
        for (std::size_t a = 0; a < axes; ++a) c += (idx[a] / div[a]) * stride[a];
        map[flat] = c;
    });
    return map;
}

} // namespace

CellAverages cell_averages(const ConfigField& field)
{
    const auto& lat = field.lattice;
    lat.validate();
    const std::size_t ncell = lat.cell_count();
    const auto map = cell_map(lat);
    std::vector<double> mag(ncell, 0.0);
    std::vector<Complex> phasor(ncell, Complex{});
    for (std::size_t i = 0; i < field.amplitudes.size(); ++i) {
        const double r = std::abs(field.amplitudes[i]);
        mag[map[i]] += r;
        if (r > 0.0) phasor[map[i]] += field.amplitudes[i] / r;
    }
    double per_cell = 1.0;
    for (std::size_t k = 0; k < lat.particle_count(); ++k)
        per_cell *= std::pow(static_cast<double>(lat.cell_points(k)), lat.particles[k].spatial_dim);

    CellAverages out;
    out.magnitude.resize(ncell);
    out.phase.resize(ncell);
    for (std::size_t c = 0; c < ncell; ++c) {
        out.magnitude[c] = mag[c] / per_cell;
        double theta = 0.0;
        if (std::abs(phasor[c]) > 1e-12) {
            theta = std::arg(phasor[c]);
            if (theta < 0.0) theta += kTwoPi;
            if (theta >= kTwoPi) theta = 0.0;
        }
        out.phase[c] = theta;
    }
    return out;
}

DiscreteField quantize(const ConfigField& field)
{
    const auto avg = cell_averages(field);
    const auto& lat = field.lattice;
    const auto steps = static_cast<std::uint32_t>(lat.phase_steps());
    DiscreteField d;
    d.lattice = lat;
    d.n_f.resize(avg.magnitude.size());
    d.n_theta.resize(avg.magnitude.size());
    for (std::size_t c = 0; c < avg.magnitude.size(); ++c) {
        const double m = avg.magnitude[c];
        // Strictly above f_0 to be occupied; a tie quantizes to zero.
        d.n_f[c] = m > lat.base_magnitude
                       ? static_cast<std::uint32_t>(std::floor(m / lat.base_magnitude))
                       : 0u;
        auto nt = static_cast<std::uint32_t>(std::floor(avg.phase[c] / lat.base_phase));
        d.n_theta[c] = std::min(nt, steps - 1);
    }
    return d;
}

std::size_t relative_volume(const ConfigField& field)
{
    const auto avg = cell_averages(field);
    const double f0 = field.lattice.base_magnitude;
    return static_cast<std::size_t>(
        std::count_if(avg.magnitude.begin(), avg.magnitude.end(), [f0](double m) { return m > f0; }));
}

std::vector<double> marginal_density(const ConfigField& field, std::size_t k)
{
    const auto& lat = field.lattice;
    if (k >= lat.particle_count()) throw ConfigError("particle index out of range");
    const std::size_t off = lat.axis_offset(k);
    const auto dim = static_cast<std::size_t>(lat.particles[k].spatial_dim);
    const std::size_t m = lat.grid_points;
    std::size_t sub_size = 1;
    for (std::size_t d = 0; d < dim; ++d) sub_size *= m;

    std::vector<double> g(sub_size, 0.0);
    detail::for_each_point(m, lat.axes(), [&](std::size_t flat, const auto& idx) {
        std::size_t sub = 0;
        for (std::size_t d = 0; d < dim; ++d) sub = sub * m + idx[off + d];
        g[sub] += std::norm(field.amplitudes[flat]);
    });
    const double measure = std::pow(lat.spacing(), static_cast<double>(lat.axes() - dim));
    for (auto& v : g) v *= measure;
    return g;
}

std::size_t particle_volume(const ConfigField& field, std::size_t k)
{
    const auto& lat = field.lattice;
    if (k >= lat.particle_count()) throw ConfigError("particle index out of range");
    const auto disc = quantize(field);

    // Cell grid: per-axis cell counts in axis order.
    const std::size_t axes = lat.axes();
    std::vector<std::size_t> cells(axes);
    for (std::size_t a = 0; a < axes; ++a) cells[a] = lat.cells_per_axis(lat.particle_of_axis(a));
    const std::size_t off = lat.axis_offset(k);
    const auto dim = static_cast<std::size_t>(lat.particles[k].spatial_dim);
    const std::size_t per_axis = lat.cells_per_axis(k);
    std::size_t sub_size = 1;
    for (std::size_t d = 0; d < dim; ++d) sub_size *= per_axis;

    std::vector<bool> hit(sub_size, false);
    std::vector<std::size_t> idx(axes);
    for (std::size_t c = 0; c < disc.n_f.size(); ++c) {
        if (disc.n_f[c] == 0) continue;
        std::size_t rest = c;
        for (std::size_t a = axes; a-- > 0;) {
            idx[a] = rest % cells[a];
            rest /= cells[a];
        }
        std::size_t sub = 0;
        for (std::size_t d = 0; d < dim; ++d) sub = sub * per_axis + idx[off + d];
        hit[sub] = true;
    }
    return static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
}

double mean_momentum_magnitude(const ConfigField& field, std::size_t k, double planck)
{
    const auto& lat = field.lattice;
    if (k >= lat.particle_count()) throw ConfigError("particle index out of range");
    std::vector<Complex> spectrum = field.amplitudes;
    detail::FftPlan plan(lat.grid_points, lat.axes());
    plan.forward(spectrum.data());

    const double hbar = planck / kTwoPi;
    const std::size_t off = lat.axis_offset(k);
    const auto dim = static_cast<std::size_t>(lat.particles[k].spatial_dim);
    double weight = 0.0;
    double acc = 0.0;
    detail::for_each_point(lat.grid_points, lat.axes(), [&](std::size_t flat, const auto& idx) {
        double p2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double kap = detail::wavenumber(idx[off + d], lat.grid_points, lat.domain_length);
            p2 += kap * kap;
        }
        const double w = std::norm(spectrum[flat]);
        weight += w;
        acc += w * hbar * std::sqrt(p2);
    });
    return weight > 0.0 ? acc / weight : 0.0;
}

double de_broglie_cell_length(const ConfigField& field, std::size_t k, double c_scale,
                              double planck)
{
    if (!(c_scale > 0.0)) throw ConfigError("c_scale must be positive");
    const auto& lat = field.lattice;
    const double p = mean_momentum_magnitude(field, k, planck);
    const double p_min = (planck / kTwoPi) * kTwoPi / lat.domain_length;
    if (!(p > 1e-6 * p_min))
        throw DegenerateMomentumError("particle " + std::to_string(k) +
                                      " has zero mean momentum magnitude; fix its cell length");
    const double a = c_scale * planck / p;
    const double dx = lat.spacing();
    const double steps = std::floor(a / dx + 1e-9);
    return std::max(steps, 1.0) * dx;
}

double boundary_weight(const ConfigField& field, std::size_t margin)
{
    const auto& lat = field.lattice;
    const std::size_t m = lat.grid_points;
    double edge = 0.0;
    double total = 0.0;
    detail::for_each_point(m, lat.axes(), [&](std::size_t flat, const auto& idx) {
        const double w = std::norm(field.amplitudes[flat]);
        total += w;
        for (auto i : idx) {
            if (i < margin || i + margin >= m) {
                edge += w;
                break;
            }
        }
    });
    return total > 0.0 ? edge / total : 0.0;
}

double periodic_delta(double a, double b, double length)
{
    double d = a - b;
    d -= length * std::round(d / length);
    return d;
}

} // namespace ccqm
