#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace ccqm {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
/// Simulation Planck constant h; the default makes hbar = 1.
inline constexpr double kDefaultPlanck = kTwoPi;

enum class Statistics { boson, fermion, distinguishable };

std::string to_string(Statistics s);
Statistics statistics_from_string(const std::string& s);

struct ParticleSpec {
    std::string species = "p";
    Statistics statistics = Statistics::distinguishable;
    double mass = 1.0;
    int spatial_dim = 1;
};

/// Same species, statistics and mass.
bool identical(const ParticleSpec& a, const ParticleSpec& b);
/// Identical and subject to exchange (anti)symmetry, i.e. bosons or fermions.
bool exchange_partners(const ParticleSpec& a, const ParticleSpec& b);

/// Uniform periodic grid over configuration space plus the reference-cell
/// tiling and quantization constants.
///
/// Every configuration-space axis has M points spanning [-L/2, L/2). Particle
/// k owns `spatial_dim` consecutive axes, particles in list order, and the
/// amplitude array is row-major with the last axis fastest. Reference cells
/// are axis-aligned blocks of a_k / dx grid points anchored at index 0.
struct LatticeSpec {
    std::vector<ParticleSpec> particles;
    std::size_t grid_points = 64;      // M, power of two
    double domain_length = 1.0;        // L
    std::vector<double> cell_lengths;  // a_k, one per particle
    double base_magnitude = 1.0;       // f_0
    double base_phase = kTwoPi / 16.0; // theta_0

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    std::size_t particle_count() const { return particles.size(); }
    /// D = sum of spatial dims.
    std::size_t axes() const;
    /// M^D.
    std::size_t size() const;
    double spacing() const { return domain_length / static_cast<double>(grid_points); }
    /// dx^D.
    double cell_measure() const;
    /// First axis owned by particle k.
    std::size_t axis_offset(std::size_t k) const;
    /// Particle owning a configuration-space axis.
    std::size_t particle_of_axis(std::size_t axis) const;
    /// Grid points per reference-cell side for particle k (a_k / dx).
    std::size_t cell_points(std::size_t k) const;
    /// Reference cells per axis for particle k (M / cell_points).
    std::size_t cells_per_axis(std::size_t k) const;
    /// Total number of reference cells in configuration space.
    std::size_t cell_count() const;
    /// Coordinate of grid index i along any axis.
    double coordinate(std::size_t i) const;
    /// Number of quantized phase steps, 2 pi / theta_0.
    std::size_t phase_steps() const;
};

/// Row-major multi-index helper over an M^D grid.
class GridIndexer {
public:
    GridIndexer(std::size_t points_per_axis, std::size_t axes);

    std::size_t axes() const { return axes_; }
    std::size_t points() const { return points_; }
    std::size_t size() const { return size_; }
    std::size_t stride(std::size_t axis) const { return strides_[axis]; }

    void decode(std::size_t flat, std::span<std::size_t> index) const;
    std::size_t encode(std::span<const std::size_t> index) const;

private:
    std::size_t points_;
    std::size_t axes_;
    std::size_t size_;
    std::vector<std::size_t> strides_;
};

/// Complex amplitudes of an N-particle wavefunction on the lattice grid.
struct ConfigField {
    LatticeSpec lattice;
    std::vector<Complex> amplitudes;
    double time = 0.0;

    /// Zero field on a validated lattice.
    static ConfigField zeros(LatticeSpec lattice, double time = 0.0);

    GridIndexer indexer() const { return {lattice.grid_points, lattice.axes()}; }
};

/// Quantized (n_f, n_theta) per reference cell, cells in row-major order
/// over the cell grid (same axis order as the amplitude grid).
struct DiscreteField {
    LatticeSpec lattice;
    std::vector<std::uint32_t> n_f;
    std::vector<std::uint32_t> n_theta;

    std::size_t occupied() const;
};

/// sum |psi|^2 dV.
double norm_squared(const ConfigField& field);
/// Scales the field to unit norm; throws ZeroSupportError if it vanishes.
void normalize(ConfigField& field);
/// <a|b> on the grid (same lattice shape required).
Complex inner_product(const ConfigField& a, const ConfigField& b);

/// Product of single-particle orbitals, orbital k tabulated on particle k's
/// sub-grid (M^{d_k} values). Not symmetrized, not normalized.
ConfigField product_state(const LatticeSpec& lattice,
                          const std::vector<std::vector<Complex>>& orbitals,
                          double time = 0.0);

// Per-cell reductions ---------------------------------------------------

struct CellAverages {
    std::vector<double> magnitude; // arithmetic mean of |psi| over the cell
    std::vector<double> phase;     // circular mean in [0, 2 pi), 0 if undefined
};

CellAverages cell_averages(const ConfigField& field);

/// Cell-averaged magnitude floored to units of f_0; cells at or below f_0
/// quantize to zero. Phase floored to units of theta_0.
DiscreteField quantize(const ConfigField& field);

/// Number of reference cells whose mean |psi| is strictly above f_0.
std::size_t relative_volume(const ConfigField& field);

/// Position-space density of particle k: |psi|^2 summed over every other
/// axis times their measure. Tabulated on particle k's sub-grid.
std::vector<double> marginal_density(const ConfigField& field, std::size_t k);

/// Number of particle-k cells in which the quantized field's marginal is
/// nonzero.
std::size_t particle_volume(const ConfigField& field, std::size_t k);

/// Mean de Broglie wavelength scaled by c_scale, snapped down to a whole
/// number of grid spacings (at least one). Throws DegenerateMomentumError
/// when <|p_k|> vanishes.
double de_broglie_cell_length(const ConfigField& field, std::size_t k, double c_scale,
                              double planck = kDefaultPlanck);

/// Expectation of |p_k| from the spectral density.
double mean_momentum_magnitude(const ConfigField& field, std::size_t k,
                               double planck = kDefaultPlanck);

/// Fraction of the norm lying within `margin` grid points of the domain edge
/// on any axis. Used to detect wrap-around contamination.
double boundary_weight(const ConfigField& field, std::size_t margin);

/// Minimum-image displacement a - b on the periodic domain.
double periodic_delta(double a, double b, double length);

} // namespace ccqm
