#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccqm/ccqm.hpp"
#include "ccqm/evolution.hpp"
#include "ccqm/grw.hpp"
#include "ccqm/lattice.hpp"

namespace ccqm {

inline constexpr int kConfigFormatVersion = 1;

/// Initial single-particle packet, tabulated on that particle's sub-grid.
struct PacketSpec {
    enum class Shape { gaussian, flat, two_gaussian };
    Shape shape = Shape::gaussian;
    std::vector<double> center;   // gaussian, two_gaussian midpoint
    double width = 1.0;           // gaussian sigma
    std::vector<double> momentum; // plane-wave factor exp(i k.x)
    double separation = 0.0;      // two_gaussian: distance along the first axis
    std::size_t cells = 1;        // flat: reference cells per axis, from index 0
};

struct WavefunctionSpec {
    std::vector<std::size_t> particles;
    /// One packet per particle, in the order of `particles`.
    std::vector<PacketSpec> packets;
};

struct SweepSpec {
    std::vector<std::size_t> v_critical;
    std::vector<double> fraction;
    std::vector<double> base_magnitude;
};

enum class Model { unitary, grw, ccqm };
std::string to_string(Model m);

/// Everything a run needs. Parsed from a versioned JSON document.
struct RunConfig {
    std::string recipe = "run";
    std::string preset = "desk";

    std::size_t grid_points = 256;
    double domain_length = 64.0;
    double base_magnitude = 0.05;
    double base_phase = kTwoPi / 16.0;
    /// One per particle. Ignored for particles sized by cell_scale.
    std::vector<double> cell_lengths;
    /// When positive, cell lengths follow c * mean de Broglie wavelength.
    double cell_scale = 0.0;

    std::vector<ParticleSpec> particles;
    std::vector<WavefunctionSpec> wavefunctions;
    HamiltonianSpec hamiltonian;

    Model model = Model::unitary;
    GrwParams grw;
    CcqmParams ccqm;
    double merge_coefficient = 0.0;
    std::size_t max_particles = 3;
    std::size_t max_grid_points = std::size_t{1} << 22;

    double dt = 0.05;
    double t_end = 1.0;
    std::uint64_t seed = 1;
    std::size_t trajectories = 1;
    std::size_t threads = 1;

    bool write_snapshots = true;
    std::size_t series_every = 1;

    SweepSpec sweep;

    /// Canonical JSON form (all defaults filled in).
    nlohmann::ordered_json to_json() const;
};

/// Parses and validates. Unknown keys and out-of-range values raise
/// ConfigError naming the offending field path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Documented schema of the configuration format.
nlohmann::ordered_json config_schema();

/// Stable 64-bit hash (FNV-1a) of the canonical JSON form.
std::uint64_t config_hash(const RunConfig& config);

/// Built-in configuration for a named recipe.
RunConfig recipe_defaults(const std::string& recipe);
const std::vector<std::string>& recipe_names();

/// Lattice for one wavefunction of the configuration, with cell lengths
/// resolved (including de Broglie sizing from the initial field).
LatticeSpec lattice_for(const RunConfig& config, const std::vector<std::size_t>& particles);

/// Normalized, (anti)symmetrized initial field for one wavefunction.
ConfigField initial_field(const RunConfig& config, const WavefunctionSpec& wf);

/// Tabulates a packet on a particle sub-grid.
std::vector<Complex> tabulate_packet(const LatticeSpec& lattice, int dim, const PacketSpec& packet,
                                     std::size_t cell_points);

} // namespace ccqm
