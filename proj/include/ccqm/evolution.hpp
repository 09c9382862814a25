#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "ccqm/lattice.hpp"

namespace ccqm {

// External potentials ---------------------------------------------------

struct NoPotential {};

/// 0.5 * stiffness * |x - center|^2 (minimum-image distance).
struct HarmonicPotential {
    double stiffness = 1.0;
    std::vector<double> center; // empty means origin
};

/// Values on the particle's own sub-grid (M^d entries).
struct TabulatedPotential {
    std::vector<double> values;
};

/// Slab of given height across the first axis, optionally pierced by
/// apertures along the second axis (2D and 3D particles only).
struct BarrierPotential {
    struct Aperture {
        double center = 0.0;
        double width = 0.0;
    };
    double position = 0.0;
    double thickness = 1.0;
    double height = 1.0;
    std::vector<Aperture> apertures;
};

using ExternalPotential =
    std::variant<NoPotential, HarmonicPotential, TabulatedPotential, BarrierPotential>;

// Pair interactions -----------------------------------------------------

/// strength / sqrt(r^2 + softening^2).
struct SoftCoulomb {
    double strength = 1.0;
    double softening = 1.0;
};

/// -depth * exp(-r^2 / (2 width^2)).
struct GaussianWell {
    double depth = 1.0;
    double width = 1.0;
};

struct PairInteraction {
    std::size_t first = 0;
    std::size_t second = 1;
    std::variant<SoftCoulomb, GaussianWell> kind = GaussianWell{};
    /// Interaction vanishes beyond this separation.
    double cutoff = std::numeric_limits<double>::infinity();

    double operator()(double r) const;
};

struct HamiltonianSpec {
    /// One entry per particle, or empty for a free Hamiltonian.
    std::vector<ExternalPotential> external;
    std::vector<PairInteraction> pairs;
    double planck = kDefaultPlanck;

    double hbar() const { return planck / kTwoPi; }
    /// Throws ConfigError for a Hamiltonian that does not fit the lattice.
    void validate(const LatticeSpec& lattice) const;
    /// Pair list keeps only pairs among `particles`, reindexed to positions
    /// in that list; externals follow the same selection.
    HamiltonianSpec restricted(const std::vector<std::size_t>& particles) const;
};

/// Total potential on the full configuration grid.
std::vector<double> tabulate_potential(const LatticeSpec& lattice, const HamiltonianSpec& h);

/// Expectation of |V_pair| for one pair under the field's joint density.
double pair_interaction_weight(const ConfigField& field, const PairInteraction& pair);

/// Largest stable dt for which the potential phase per step stays under pi/8;
/// falls back to m dx^2 / hbar when the potential vanishes.
double default_time_step(const LatticeSpec& lattice, const HamiltonianSpec& h);

/// <H> using the spectral kinetic term.
double energy(const ConfigField& field, const HamiltonianSpec& h);

/// Second-order (Strang) split-step propagator for a fixed lattice shape,
/// Hamiltonian and time step. Reusable across many steps.
class Propagator {
public:
    Propagator(const LatticeSpec& lattice, HamiltonianSpec h, double dt);
    ~Propagator();
    Propagator(Propagator&&) noexcept;
    Propagator& operator=(Propagator&&) noexcept;

    double dt() const { return dt_; }
    /// Advances by dt in place. Throws NumericError on non-finite output.
    void step(ConfigField& field) const;
    /// True if this propagator applies to fields on `lattice`.
    bool compatible(const LatticeSpec& lattice) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    double dt_;
};

/// Field advanced by dt. dt == 0 returns the input unchanged.
ConfigField step(const ConfigField& field, const HamiltonianSpec& h, double dt);

/// Repeated steps of size dt; the last step is shortened to land exactly on
/// t_target.
ConfigField evolve_until(const ConfigField& field, const HamiltonianSpec& h, double t_target,
                         double dt);

} // namespace ccqm
