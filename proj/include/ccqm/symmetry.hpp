#pragma once

#include <cstddef>
#include <vector>

#include "ccqm/lattice.hpp"

namespace ccqm {

/// Sets of particle indices that must be (anti)symmetrized together: bosons
/// or fermions with identical specs. Singleton groups are omitted.
std::vector<std::vector<std::size_t>> exchange_groups(const std::vector<ParticleSpec>& particles);

/// Field with particle coordinates relabelled: out(x_0..x_{N-1}) =
/// in(x_{perm[0]}..x_{perm[N-1]}). Permuted particles must share spatial dim.
ConfigField permute_particles(const ConfigField& field, const std::vector<std::size_t>& perm);

/// Sum over every permutation within every exchange group, each weighted by
/// its sign for fermion groups. Not divided by the group order.
ConfigField symmetrized_sum(const ConfigField& field);

/// Largest norm of psi - s * P_ij psi over exchange pairs (i, j), where s is
/// +1 for bosons and -1 for fermions. Zero for a correctly symmetrized field.
double exchange_residual(const ConfigField& field);

} // namespace ccqm
