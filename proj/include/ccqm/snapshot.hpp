#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ccqm/lattice.hpp"

namespace ccqm {

inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Binary snapshot, little-endian:
///   "CCQM" | u32 version | u32 N | u32 dim[N] | u32 M | f64 L | f64 a[N]
///   | f64 f_0 | f64 theta_0 | f64 time | (f64 re, f64 im)[M^D]
/// Amplitudes are row-major with the last axis fastest.
void write_snapshot(std::ostream& out, const ConfigField& field);
void write_snapshot(const std::filesystem::path& path, const ConfigField& field);

/// Particle species, statistics and masses are not part of the format; pass
/// them to restore the metadata, otherwise distinguishable unit-mass
/// particles are assumed.
ConfigField read_snapshot(std::istream& in,
                          const std::optional<std::vector<ParticleSpec>>& particles = {});
ConfigField read_snapshot(const std::filesystem::path& path,
                          const std::optional<std::vector<ParticleSpec>>& particles = {});

} // namespace ccqm
