#include "ccqm/snapshot.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "ccqm/errors.hpp"

namespace ccqm {

namespace {

static_assert(std::endian::native == std::endian::little,
              "snapshot I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value)
{
    std::array<char, sizeof(T)> buf;
    std::memcpy(buf.data(), &value, sizeof(T));
    out.write(buf.data(), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    std::array<char, sizeof(T)> buf;
    if (!in.read(buf.data(), sizeof(T))) throw ConfigError("truncated snapshot");
    T value;
    std::memcpy(&value, buf.data(), sizeof(T));
    return value;
}

} // namespace

void write_snapshot(std::ostream& out, const ConfigField& field)
{
    const auto& lat = field.lattice;
    out.write("CCQM", 4);
    put<std::uint32_t>(out, kSnapshotVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(lat.particle_count()));
    for (const auto& p : lat.particles) put<std::uint32_t>(out, static_cast<std::uint32_t>(p.spatial_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(lat.grid_points));
    put<double>(out, lat.domain_length);
    for (double a : lat.cell_lengths) put<double>(out, a);
    put<double>(out, lat.base_magnitude);
    put<double>(out, lat.base_phase);
    put<double>(out, field.time);
    for (const auto& z : field.amplitudes) {
        put<double>(out, z.real());
        put<double>(out, z.imag());
    }
    if (!out) throw Error("failed writing snapshot");
}

void write_snapshot(const std::filesystem::path& path, const ConfigField& field)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_snapshot(out, field);
}

ConfigField read_snapshot(std::istream& in, const std::optional<std::vector<ParticleSpec>>& particles)
{
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "CCQM", 4) != 0)
        throw ConfigError("not a CCQM snapshot");
    const auto version = get<std::uint32_t>(in);
    if (version != kSnapshotVersion)
        throw ConfigError("unsupported snapshot version " + std::to_string(version));
    const auto n = get<std::uint32_t>(in);
    if (n == 0 || n > 64) throw ConfigError("snapshot particle count out of range");

    LatticeSpec lat;
    if (particles && particles->size() != n)
        throw ConfigError("particle metadata does not match snapshot");
    for (std::uint32_t k = 0; k < n; ++k) {
        ParticleSpec p = particles ? (*particles)[k] : ParticleSpec{};
        if (!particles) p.species = "p" + std::to_string(k);
        p.spatial_dim = static_cast<int>(get<std::uint32_t>(in));
        if (particles && p.spatial_dim != (*particles)[k].spatial_dim)
            throw ConfigError("particle metadata dimension does not match snapshot");
        lat.particles.push_back(p);
    }
    lat.grid_points = get<std::uint32_t>(in);
    lat.domain_length = get<double>(in);
    for (std::uint32_t k = 0; k < n; ++k) lat.cell_lengths.push_back(get<double>(in));
    lat.base_magnitude = get<double>(in);
    lat.base_phase = get<double>(in);
    const double time = get<double>(in);

    ConfigField field = ConfigField::zeros(lat, time);
    for (auto& z : field.amplitudes) {
        const double re = get<double>(in);
        const double im = get<double>(in);
        z = Complex(re, im);
    }
    return field;
}

ConfigField read_snapshot(const std::filesystem::path& path,
                          const std::optional<std::vector<ParticleSpec>>& particles)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open snapshot " + path.string());
    return read_snapshot(in, particles);
}

} // namespace ccqm
