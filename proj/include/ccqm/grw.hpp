#pragma once

#include <cstddef>
#include <vector>

#include "ccqm/events.hpp"
#include "ccqm/lattice.hpp"
#include "ccqm/rng.hpp"

namespace ccqm {

/// GRW constants: per-particle hit rate and inverse squared localization
/// radius.
struct GrwParams {
    double lambda_rate = 1.0;
    double alpha = 1.0;

    void validate() const;
};

struct ScheduledHit {
    double time = 0.0;
    std::size_t particle = 0;
};

/// Mean waiting time between hits for n particles, 1 / (n lambda).
double mean_wait_time(double n_particles, double lambda_rate);

/// Superposition of n independent rate-lambda Poisson processes on
/// (0, horizon], sorted by time, each hit assigned to a uniform particle.
std::vector<ScheduledHit> sample_hit_schedule(std::size_t n_particles, double lambda_rate,
                                              double horizon, RngStream& rng);

/// Normalized single-particle Gaussian (alpha/pi)^{d/4} exp(-alpha r^2 / 2).
double gaussian_jump(double r_squared, double alpha, int dim);

/// P(x) = ||j(x - x_k) psi||^2 for every grid point x of particle k's
/// sub-grid. Evaluated as a separable periodic convolution of particle k's
/// marginal with j^2.
std::vector<double> grw_hit_density(const ConfigField& field, std::size_t k, double alpha);

/// Grid index on particle k's sub-grid drawn from grw_hit_density.
std::size_t sample_grw_center(const ConfigField& field, std::size_t k, double alpha,
                              RngStream& rng);

/// Coordinates of a flat index on a particle sub-grid of dimension `dim`.
std::vector<double> subgrid_point(const LatticeSpec& lattice, int dim, std::size_t flat);

/// Multiplies by j(center - x_k) along particle k's axes and renormalizes.
/// Throws ZeroSupportError when the product vanishes.
ConfigField apply_grw_hit(const ConfigField& field, std::size_t k,
                          const std::vector<double>& center, double alpha);

/// Samples a center, applies the hit and records the event.
struct GrwHitResult {
    ConfigField field;
    CollapseEvent event;
};
GrwHitResult grw_hit(const ConfigField& field, std::size_t k, double alpha, RngStream& rng);

} // namespace ccqm
