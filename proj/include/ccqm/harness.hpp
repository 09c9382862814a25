#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ccqm/config.hpp"
#include "ccqm/events.hpp"
#include "ccqm/registry.hpp"

namespace ccqm {

/// One property check reported in summary.json.
struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// One row of series.csv. Columns, in order:
///   time, wavefunction, particle, relative_volume, norm, marginal_mean, marginal_width,
///   boundary_weight
/// marginal_mean is along the particle's first axis; marginal_width is the
/// square root of the summed per-axis variances. boundary_weight is the
/// wavefunction's share of the norm within M/16 grid points of the domain
/// edge on any axis (wrap-around indicator).
struct SeriesRow {
    double time = 0.0;
    std::uint64_t wavefunction = 0;
    std::size_t particle = 0;
    std::size_t relative_volume = 0;
    double norm = 0.0;
    double marginal_mean = 0.0;
    double marginal_width = 0.0;
    double boundary_weight = 0.0;
};

inline constexpr const char* kSeriesHeader =
    "time,wavefunction,particle,relative_volume,norm,marginal_mean,marginal_width,boundary_weight";

void write_series(const std::filesystem::path& path, const std::vector<SeriesRow>& rows);
std::vector<SeriesRow> read_series(const std::filesystem::path& path);
std::vector<SeriesRow> series_rows(const Registry& registry);
/// Rows for one field whose particles carry the given global indices.
std::vector<SeriesRow> field_rows(const ConfigField& field, std::uint64_t id, const std::vector<std::size_t>& particles);
/// Edge band, in grid points, used for boundary_weight.
std::size_t boundary_margin(const LatticeSpec& lattice);

/// Registry populated with the configuration's initial wavefunctions.
Registry build_registry(const RunConfig& config);

/// Result of one seeded trajectory.
struct Trajectory {
    std::vector<CollapseEvent> events;
    std::vector<SeriesRow> series;
    std::vector<ConfigField> final_fields;
};

/// Runs one trajectory from t = 0 to t_end. When `dir` is non-empty the
/// event log, series and (optionally) the final checkpoint are written there.
Trajectory simulate(const RunConfig& config, RngStream rng, const std::filesystem::path& dir);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct RunReport {
    std::vector<Check> checks;
    bool passed() const;
};

/// Executes config.recipe, writing every artifact under `out`, then derives
/// the property checks from those artifacts and writes summary.json.
RunReport run_experiment(const RunConfig& config, const std::filesystem::path& out);

/// Re-derives the property checks of a finished run from its artifacts.
RunReport replay(const std::filesystem::path& out);

/// Fringe visibility (max - min) / (max + min) of a density over the points
/// with |x| <= half_window.
double fringe_visibility(const std::vector<double>& x, const std::vector<double>& density, double half_window);

} // namespace ccqm
