#include "ccqm/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ccqm/errors.hpp"
#include "fft.hpp"
#include "grid_walk.hpp"

namespace ccqm {

double PairInteraction::operator()(double r) const
{
    if (r > cutoff) return 0.0;
    if (const auto* c = std::get_if<SoftCoulomb>(&kind))
        return c->strength / std::sqrt(r * r + c->softening * c->softening);
    const auto& g = std::get<GaussianWell>(kind);
    return -g.depth * std::exp(-r * r / (2.0 * g.width * g.width));
}

void HamiltonianSpec::validate(const LatticeSpec& lattice) const
{
    const std::size_t n = lattice.particle_count();
    if (!(planck > 0.0)) throw ConfigError("planck constant must be positive");
    if (!external.empty() && external.size() != n)
        throw ConfigError("external potentials: need none or one per particle");
    for (std::size_t k = 0; k < external.size(); ++k) {
        const auto dim = static_cast<std::size_t>(lattice.particles[k].spatial_dim);
        const std::string who = "external potential " + std::to_string(k) + ": ";
        if (const auto* hp = std::get_if<HarmonicPotential>(&external[k])) {
            if (!(hp->stiffness >= 0.0)) throw ConfigError(who + "stiffness must be non-negative");
            if (!hp->center.empty() && hp->center.size() != dim)
                throw ConfigError(who + "center has the wrong dimension");
        } else if (const auto* tp = std::get_if<TabulatedPotential>(&external[k])) {
            std::size_t expect = 1;
            for (std::size_t d = 0; d < dim; ++d) expect *= lattice.grid_points;
            if (tp->values.size() != expect) throw ConfigError(who + "table has the wrong size");
            for (double v : tp->values)
                if (!std::isfinite(v)) throw ConfigError(who + "table holds non-finite values");
        } else if (const auto* bp = std::get_if<BarrierPotential>(&external[k])) {
            if (!(bp->thickness > 0.0) || !std::isfinite(bp->height))
                throw ConfigError(who + "barrier needs positive thickness and finite height");
            if (!bp->apertures.empty() && dim < 2)
                throw ConfigError(who + "apertures need a particle with at least 2 dimensions");
        }
    }
    for (const auto& p : pairs) {
        if (p.first >= n || p.second >= n || p.first == p.second)
            throw ConfigError("pair interaction indices out of range");
        if (lattice.particles[p.first].spatial_dim != lattice.particles[p.second].spatial_dim)
            throw ConfigError("pair interaction between particles of different dimension");
        if (const auto* c = std::get_if<SoftCoulomb>(&p.kind)) {
            if (!(c->softening > 0.0) || !std::isfinite(c->strength))
                throw ConfigError("soft Coulomb needs positive softening");
        } else {
            const auto& g = std::get<GaussianWell>(p.kind);
            if (!(g.width > 0.0) || !std::isfinite(g.depth))
                throw ConfigError("Gaussian well needs positive width");
        }
        if (!(p.cutoff > 0.0)) throw ConfigError("pair cutoff must be positive");
    }
}

HamiltonianSpec HamiltonianSpec::restricted(const std::vector<std::size_t>& particles) const
{
    HamiltonianSpec out;
    out.planck = planck;
    if (!external.empty())
        for (auto p : particles) out.external.push_back(external.at(p));
    auto local = [&](std::size_t global) -> std::ptrdiff_t {
        auto it = std::find(particles.begin(), particles.end(), global);
        return it == particles.end() ? -1 : it - particles.begin();
    };
    for (const auto& p : pairs) {
        const auto a = local(p.first);
        const auto b = local(p.second);
        if (a < 0 || b < 0) continue;
        PairInteraction q = p;
        q.first = static_cast<std::size_t>(a);
        q.second = static_cast<std::size_t>(b);
        out.pairs.push_back(q);
    }
    return out;
}

namespace {

double pair_distance(const LatticeSpec& lat, const std::vector<std::size_t>& idx, std::size_t i,
                     std::size_t j)
{
    const std::size_t oi = lat.axis_offset(i);
    const std::size_t oj = lat.axis_offset(j);
    double r2 = 0.0;
    for (int d = 0; d < lat.particles[i].spatial_dim; ++d) {
        const double delta = periodic_delta(lat.coordinate(idx[oi + static_cast<std::size_t>(d)]),
                                            lat.coordinate(idx[oj + static_cast<std::size_t>(d)]),
                                            lat.domain_length);
        r2 += delta * delta;
    }
    return std::sqrt(r2);
}

std::vector<double> external_table(const LatticeSpec& lat, std::size_t k, const ExternalPotential& pot)
{
    const auto dim = static_cast<std::size_t>(lat.particles[k].spatial_dim);
    const std::size_t m = lat.grid_points;
    std::size_t size = 1;
    for (std::size_t d = 0; d < dim; ++d) size *= m;
    std::vector<double> table(size, 0.0);
    if (std::holds_alternative<NoPotential>(pot)) return table;
    if (const auto* tp = std::get_if<TabulatedPotential>(&pot)) return tp->values;

    detail::for_each_point(m, dim, [&](std::size_t flat, const auto& idx) {
        if (const auto* hp = std::get_if<HarmonicPotential>(&pot)) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double c = hp->center.empty() ? 0.0 : hp->center[d];
                const double delta = periodic_delta(lat.coordinate(idx[d]), c, lat.domain_length);
                r2 += delta * delta;
            }
            table[flat] = 0.5 * hp->stiffness * r2;
        } else if (const auto* bp = std::get_if<BarrierPotential>(&pot)) {
            const double along =
                periodic_delta(lat.coordinate(idx[0]), bp->position, lat.domain_length);
            bool blocked = std::abs(along) <= 0.5 * bp->thickness;
            if (blocked && dim >= 2) {
                for (const auto& ap : bp->apertures) {
                    if (std::abs(periodic_delta(lat.coordinate(idx[1]), ap.center, lat.domain_length)) <=
                        0.5 * ap.width) {
                        blocked = false;
                        break;
                    }
                }
            }
            table[flat] = blocked ? bp->height : 0.0;
        }
    });
    return table;
}

} // namespace

std::vector<double> tabulate_potential(const LatticeSpec& lattice, const HamiltonianSpec& h)
{
    h.validate(lattice);
    const std::size_t n = lattice.particle_count();
    const std::size_t m = lattice.grid_points;
    std::vector<std::vector<double>> tables;
    for (std::size_t k = 0; k < h.external.size(); ++k)
        tables.push_back(external_table(lattice, k, h.external[k]));

    std::vector<double> v(lattice.size(), 0.0);
    if (tables.empty() && h.pairs.empty()) return v;
    detail::for_each_point(m, lattice.axes(), [&](std::size_t flat, const auto& idx) {
        double total = 0.0;
        for (std::size_t k = 0; k < tables.size(); ++k) {
            const std::size_t off = lattice.axis_offset(k);
            std::size_t sub = 0;
            for (int d = 0; d < lattice.particles[k].spatial_dim; ++d)
                sub = sub * m + idx[off + static_cast<std::size_t>(d)];
            total += tables[k][sub];
        }
        for (const auto& p : h.pairs) total += p(pair_distance(lattice, idx, p.first, p.second));
        v[flat] = total;
    });
    (void)n;
    return v;
}

double pair_interaction_weight(const ConfigField& field, const PairInteraction& pair)
{
    const auto& lat = field.lattice;
    double acc = 0.0;
    detail::for_each_point(lat.grid_points, lat.axes(), [&](std::size_t flat, const auto& idx) {
        const double w = std::norm(field.amplitudes[flat]);
        if (w == 0.0) return;
        acc += w * std::abs(pair(pair_distance(lat, idx, pair.first, pair.second)));
    });
    return acc * lat.cell_measure();
}

double default_time_step(const LatticeSpec& lattice, const HamiltonianSpec& h)
{
    const auto v = tabulate_potential(lattice, h);
    double vmax = 0.0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    if (vmax > 0.0) return (std::numbers::pi / 8.0) * h.hbar() / vmax;
    double mmin = lattice.particles.front().mass;
    for (const auto& p : lattice.particles) mmin = std::min(mmin, p.mass);
    const double dx = lattice.spacing();
    return mmin * dx * dx / h.hbar();
}

namespace {

/// Kinetic energy per spectral grid point.
std::vector<double> kinetic_table(const LatticeSpec& lat, double hbar)
{
    std::vector<double> t(lat.size(), 0.0);
    std::vector<double> inv_mass(lat.axes());
    for (std::size_t a = 0; a < lat.axes(); ++a) inv_mass[a] = 1.0 / lat.particles[lat.particle_of_axis(a)].mass;
    detail::for_each_point(lat.grid_points, lat.axes(), [&](std::size_t flat, const auto& idx) {
        double e = 0.0;
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const double p = hbar * detail::wavenumber(idx[a], lat.grid_points, lat.domain_length);
            e += 0.5 * p * p * inv_mass[a];
        }
        t[flat] = e;
    });
    return t;
}

} // namespace

double energy(const ConfigField& field, const HamiltonianSpec& h)
{
    const auto& lat = field.lattice;
    std::vector<Complex> spectrum = field.amplitudes;
    detail::FftPlan plan(lat.grid_points, lat.axes());
    plan.forward(spectrum.data());
    const auto t = kinetic_table(lat, h.hbar());
    double kin = 0.0;
    double w = 0.0;
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        const double n = std::norm(spectrum[i]);
        kin += n * t[i];
        w += n;
    }
    const auto v = tabulate_potential(lat, h);
    double pot = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double n = std::norm(field.amplitudes[i]);
        pot += n * v[i];
        norm += n;
    }
    return (w > 0.0 ? kin / w : 0.0) + (norm > 0.0 ? pot / norm : 0.0);
}

struct Propagator::Impl {
    LatticeSpec lattice;
    detail::FftPlan plan;
    std::vector<Complex> half_kinetic; // includes the 1/n of the inverse transform
    std::vector<Complex> full_kinetic;
    std::vector<Complex> potential;    // empty when V == 0

    Impl(const LatticeSpec& lat, const HamiltonianSpec& h, double dt)
        : lattice(lat), plan(lat.grid_points, lat.axes())
    {
        const double hbar = h.hbar();
        const auto n = static_cast<double>(lat.size());
        const auto t = kinetic_table(lat, hbar);
        half_kinetic.resize(t.size());
        full_kinetic.resize(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            half_kinetic[i] = std::polar(1.0 / n, -t[i] * dt / (2.0 * hbar));
            full_kinetic[i] = std::polar(1.0 / n, -t[i] * dt / hbar);
        }
        const auto v = tabulate_potential(lat, h);
        if (std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; })) {
            potential.resize(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) potential[i] = std::polar(1.0, -v[i] * dt / hbar);
        }
    }
};

Propagator::Propagator(const LatticeSpec& lattice, HamiltonianSpec h, double dt) : dt_(dt)
{
    lattice.validate();
    h.validate(lattice);
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be non-negative");
    impl_ = std::make_unique<Impl>(lattice, h, dt);
}

Propagator::~Propagator() = default;
Propagator::Propagator(Propagator&&) noexcept = default;
Propagator& Propagator::operator=(Propagator&&) noexcept = default;

bool Propagator::compatible(const LatticeSpec& lattice) const
{
    const auto& own = impl_->lattice;
    if (own.grid_points != lattice.grid_points || own.domain_length != lattice.domain_length ||
        own.particles.size() != lattice.particles.size())
        return false;
    for (std::size_t k = 0; k < own.particles.size(); ++k) {
        if (own.particles[k].mass != lattice.particles[k].mass ||
            own.particles[k].spatial_dim != lattice.particles[k].spatial_dim)
            return false;
    }
    return true;
}

void Propagator::step(ConfigField& field) const
{
    if (dt_ == 0.0) return;
    if (!compatible(field.lattice)) throw ConfigError("propagator does not match field lattice");
    auto* data = field.amplitudes.data();
    const std::size_t n = field.amplitudes.size();
    const auto& plan = impl_->plan;
    if (impl_->potential.empty()) {
        plan.forward(data);
        for (std::size_t i = 0; i < n; ++i) data[i] *= impl_->full_kinetic[i];
        plan.backward(data);
    } else {
        plan.forward(data);
        for (std::size_t i = 0; i < n; ++i) data[i] *= impl_->half_kinetic[i];
        plan.backward(data);
        for (std::size_t i = 0; i < n; ++i) data[i] *= impl_->potential[i];
        plan.forward(data);
        for (std::size_t i = 0; i < n; ++i) data[i] *= impl_->half_kinetic[i];
        plan.backward(data);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(data[i].real()) || !std::isfinite(data[i].imag()))
            throw NumericError("non-finite amplitude at grid point " + std::to_string(i) +
                               " after step to t=" + std::to_string(field.time + dt_));
    }
    field.time += dt_;
}

ConfigField step(const ConfigField& field, const HamiltonianSpec& h, double dt)
{
    if (dt == 0.0) return field;
    ConfigField out = field;
    Propagator(field.lattice, h, dt).step(out);
    return out;
}

ConfigField evolve_until(const ConfigField& field, const HamiltonianSpec& h, double t_target,
                         double dt)
{
    if (!(dt > 0.0)) throw ConfigError("evolve_until needs a positive time step");
    const double remaining = t_target - field.time;
    if (remaining < -1e-12 * std::max(1.0, std::abs(t_target)))
        throw ConfigError("evolve_until target lies in the past");
    ConfigField out = field;
    if (remaining <= 0.0) return out;

    auto full = static_cast<std::size_t>(std::floor(remaining / dt * (1.0 + 1e-12)));
    double tail = remaining - static_cast<double>(full) * dt;
    if (tail <= 1e-12 * dt) tail = 0.0;

    if (full > 0) {
        const Propagator prop(field.lattice, h, dt);
        for (std::size_t s = 0; s < full; ++s) prop.step(out);
    }
    if (tail > 0.0) Propagator(field.lattice, h, tail).step(out);
    out.time = t_target;
    return out;
}

} // namespace ccqm
