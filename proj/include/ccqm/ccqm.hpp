#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ccqm/evolution.hpp"
#include "ccqm/events.hpp"
#include "ccqm/lattice.hpp"
#include "ccqm/rng.hpp"

namespace ccqm {

struct CcqmParams {
    std::size_t v_critical = 64;
    double fraction = 0.5;            // F
    double split_coefficient = 0.0;   // kappa_split; zero disables splitting
    double split_base_probability = 0.0; // p_0
    double check_interval = 0.0;      // <= dt means every tick
    /// Alternate center sampling and epsilon solving until epsilon moves by
    /// less than 5 percent.
    bool fixed_point_epsilon = false;

    void validate() const;
};

/// Per-particle positions (each of that particle's spatial dim).
using CenterSet = std::vector<std::vector<double>>;

/// How permutations over identical particles are combined into the jump
/// factor.
enum class JumpSymmetry {
    /// Plain sum over permutations for bosons and fermions alike. The factor
    /// is exchange symmetric, so multiplying an (anti)symmetric state keeps
    /// its exchange character. Used by the collapse.
    exchange_symmetric,
    /// Signed sum (antisymmetric over fermions). Vanishes for coincident
    /// fermion centers.
    statistics_signed,
};

bool check_critical(const ConfigField& field, const CcqmParams& params);

/// round(F * v) with ties to even.
std::size_t target_volume(std::size_t v_before, double fraction);

/// S prod_k j(x_k - c_k) with j = (eps/pi)^{d/4} exp(-eps r^2 / 2), averaged
/// over the permutations of each exchange group. Throws DegenerateJumpError
/// when the factor vanishes identically.
std::vector<double> ccqm_jump_factor(const LatticeSpec& lattice, const CenterSet& centers,
                                     double epsilon,
                                     JumpSymmetry symmetry = JumpSymmetry::exchange_symmetric);

/// Multiplies by the jump factor and renormalizes.
ConfigField apply_jump(const ConfigField& field, const CenterSet& centers, double epsilon);

/// Relative volume after apply_jump.
std::size_t post_jump_volume(const ConfigField& field, const CenterSet& centers, double epsilon);

struct EpsilonSolution {
    double epsilon = 0.0;
    std::size_t v_post = 0;
    /// False when no bracketed epsilon reached target +/- 1; epsilon then
    /// minimizes |v_post - target|.
    bool within_band = false;
    int evaluations = 0;
};

/// Smallest and largest epsilon searched for a lattice.
std::pair<double, double> epsilon_bracket(const LatticeSpec& lattice);

/// Bisection on log epsilon for post-jump volume within one cell of target_v.
EpsilonSolution solve_epsilon(const ConfigField& field, const CenterSet& centers,
                              std::size_t target_v);

/// Provisional epsilon for the first event: the solved epsilon for a jump
/// centered on the configuration-space density maximum.
double initial_epsilon_guess(const ConfigField& field, double fraction, std::size_t v_before);

/// Unnormalized center law P(c) = ||j_c psi||^2 dV over the configuration
/// grid. Zero outside the occupied region dilated by the Gaussian reach.
std::vector<double> ccqm_center_density(const ConfigField& field, double epsilon);

struct SampledCenter {
    std::size_t flat_index = 0;
    CenterSet centers;
};

/// Configuration-space grid point drawn from ccqm_center_density.
SampledCenter sample_ccqm_center(const ConfigField& field, double epsilon, RngStream& rng);

/// Per-particle coordinates of a configuration-grid point.
CenterSet centers_of(const LatticeSpec& lattice, std::size_t flat_index);

struct CollapseOutcome {
    ConfigField field;
    CollapseEvent event;
    EpsilonSolution solution;
};

/// Full jump: sample center (with the provisional epsilon, or the initial
/// guess), solve epsilon for round(F v), multiply, renormalize.
CollapseOutcome apply_ccqm_collapse(const ConfigField& field, const CcqmParams& params,
                                    RngStream& rng,
                                    std::optional<double> provisional_epsilon = std::nullopt);

struct SplitDecision {
    /// Blocks of particle indices; a single block means no split.
    std::vector<std::vector<std::size_t>> partition;
    std::vector<double> probability; // per particle
    std::vector<bool> flagged;       // per particle

    bool trivial() const { return partition.size() <= 1; }
};

/// Split probability p0 * exp(-w / kappa) for interaction weight w.
double split_probability(double weight, const CcqmParams& params);

/// Each exchange group (or lone particle) splits off with probability
/// p0 * exp(-w / kappa), where w sums the expected |V_pair| to particles
/// outside it. Identical particles always stay together.
SplitDecision decide_split(const ConfigField& field, const HamiltonianSpec& h,
                           const CcqmParams& params, RngStream& rng);

/// Factors each block by conditioning on the modal coordinates of the
/// remaining particles. Returns the input alone if any block vanishes or
/// the partition separates identical particles.
std::vector<ConfigField> perform_split(const ConfigField& field,
                                       const std::vector<std::vector<std::size_t>>& partition);

/// Lattice for a subset of particles. f_0 is rescaled as f_0^{D_sub / D} so
/// that products of flat fields quantize consistently.
LatticeSpec sub_lattice(const LatticeSpec& lattice, const std::vector<std::size_t>& particles);

} // namespace ccqm
