#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "ccqm/ccqm.hpp"
#include "ccqm/evolution.hpp"
#include "ccqm/events.hpp"
#include "ccqm/grw.hpp"
#include "ccqm/lattice.hpp"
#include "ccqm/rng.hpp"

namespace ccqm {

/// p = 1 - exp(-beta I dt), I summing E|V_pair| over cross pairs under the
/// product of the two fields' marginals. `pairs` index particles by their
/// position in the concatenated list (f1's particles, then f2's).
double merge_probability(const ConfigField& f1, const ConfigField& f2,
                         const std::vector<PairInteraction>& pairs, double dt, double beta);

/// Cross-pair interaction integral I used by merge_probability.
double cross_interaction(const ConfigField& f1, const ConfigField& f2,
                         const std::vector<PairInteraction>& pairs);

/// Product on the joint grid, summed over exchange permutations of the
/// union (not normalized). f1's particles come first.
ConfigField symmetrized_product(const ConfigField& f1, const ConfigField& f2);

/// Normalized symmetrized product. Throws MergeAborted when the sum vanishes.
ConfigField merge(const ConfigField& f1, const ConfigField& f2);

struct Wavefunction {
    std::uint64_t id = 0;
    /// Global particle indices, in field order.
    std::vector<std::size_t> particles;
    ConfigField field;
    double next_check = 0.0;
    std::optional<double> last_epsilon;
};

struct RegistryLimits {
    /// Merges producing more particles than this are deferred.
    std::size_t max_particles = 3;
    /// Merges producing more grid points than this are deferred.
    std::size_t max_grid_points = std::size_t{1} << 22;
};

/// Live wavefunctions sharing one periodic grid, advanced in lock step.
class Registry {
public:
    Registry(std::vector<ParticleSpec> particles, HamiltonianSpec global_h, std::uint64_t seed);

    /// Adds a normalized field holding the given global particles.
    std::uint64_t add(ConfigField field, std::vector<std::size_t> particles);

    const std::vector<Wavefunction>& wavefunctions() const { return wavefunctions_; }
    const std::vector<CollapseEvent>& events() const { return events_; }
    const std::vector<ParticleSpec>& particles() const { return particles_; }
    const HamiltonianSpec& hamiltonian() const { return hamiltonian_; }
    double time() const { return time_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t particle_total() const;

    RegistryLimits limits;
    double merge_coefficient = 0.0; // beta

    /// Hamiltonian for one member, with particles renumbered locally.
    HamiltonianSpec local_hamiltonian(const Wavefunction& wf) const;

    void write_checkpoint(const std::filesystem::path& dir, std::uint64_t config_hash,
                          const RngStream& rng) const;
    /// Restores a registry and the rng state written by write_checkpoint.
    static std::pair<Registry, RngStream> read_checkpoint(const std::filesystem::path& dir,
                                                          HamiltonianSpec global_h);

private:
    friend void tick(Registry&, double, const std::optional<GrwParams>&,
                     const std::optional<CcqmParams>&, RngStream&);

    void evolve_member(Wavefunction& wf, double t_target, double dt);
    const Propagator& propagator_for(const Wavefunction& wf, double dt);

    std::vector<ParticleSpec> particles_;
    HamiltonianSpec hamiltonian_;
    std::vector<Wavefunction> wavefunctions_;
    std::vector<CollapseEvent> events_;
    double time_ = 0.0;
    std::uint64_t seed_ = 0;
    std::uint64_t next_id_ = 0;
    std::map<std::uint64_t, Propagator> propagators_;
};

/// Advances every member by dt and applies the enabled collapse model.
/// At most one of grw / ccqm may be set. In ccqm mode merges are proposed
/// for each unordered pair in ascending id order, then members due for a
/// check that are critical either split or collapse. In grw mode each
/// member receives the hits its Poisson schedule places in (t, t + dt].
void tick(Registry& registry, double dt, const std::optional<GrwParams>& grw,
          const std::optional<CcqmParams>& ccqm, RngStream& rng);

} // namespace ccqm
