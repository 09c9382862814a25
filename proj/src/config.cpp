#include "ccqm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ccqm/errors.hpp"
#include "ccqm/symmetry.hpp"

namespace ccqm {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Model m)
{
    switch (m) {
    case Model::unitary: return "unitary";
    case Model::grw: return "grw";
    case Model::ccqm: return "ccqm";
    }
    return "unitary";
}

namespace {

/// Walks one JSON object, remembering which keys were read so that the
/// leftovers can be reported as unknown.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& what)
    {
        throw ConfigError(path + ": " + what);
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json& raw(const std::string& key)
    {
        seen_.insert(key);
        if (!j_.contains(key)) fail(at(key), "missing required field");
        return j_.at(key);
    }

    double real(const std::string& key, double fallback)
    {
        seen_.insert(key);
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail(at(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(at(key), "must be finite");
        return x;
    }

    double positive(const std::string& key, double fallback)
    {
        const double x = real(key, fallback);
        if (!(x > 0.0)) fail(at(key), "must be positive");
        return x;
    }

    double non_negative(const std::string& key, double fallback)
    {
        const double x = real(key, fallback);
        if (!(x >= 0.0)) fail(at(key), "must be non-negative");
        return x;
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback)
    {
        seen_.insert(key);
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned()) fail(at(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback)
    {
        seen_.insert(key);
        if (!has(key)) return fallback;
        if (!j_.at(key).is_boolean()) fail(at(key), "expected true or false");
        return j_.at(key).get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed)
    {
        seen_.insert(key);
        if (!has(key)) return fallback;
        if (!j_.at(key).is_string()) fail(at(key), "expected a string");
        auto s = j_.at(key).get<std::string>();
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            fail(at(key), "'" + s + "' is not one of: " + list);
        }
        return s;
    }

    std::vector<double> reals(const std::string& key, std::vector<double> fallback = {})
    {
        seen_.insert(key);
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_array()) fail(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::vector<std::uint64_t> counts(const std::string& key)
    {
        seen_.insert(key);
        if (!has(key)) return {};
        const auto& v = j_.at(key);
        if (!v.is_array()) fail(at(key), "expected an array of integers");
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_unsigned())
                fail(at(key) + "[" + std::to_string(i) + "]", "expected a non-negative integer");
            out.push_back(v[i].get<std::uint64_t>());
        }
        return out;
    }

    /// Array of objects under `key`, each visited with its own Reader.
    template <class F>
    void objects(const std::string& key, F&& visit)
    {
        seen_.insert(key);
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_array()) fail(at(key), "expected an array");
        for (std::size_t i = 0; i < v.size(); ++i) {
            Reader r(v[i], at(key) + "[" + std::to_string(i) + "]");
            visit(r, i);
            r.finish();
        }
    }

    template <class F>
    void object(const std::string& key, F&& visit)
    {
        seen_.insert(key);
        if (!has(key)) return;
        Reader r(j_.at(key), at(key));
        visit(r);
        r.finish();
    }

    void finish() const
    {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) fail(at(item.key()), "unknown key");
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

PacketSpec::Shape shape_from(const std::string& s)
{
    if (s == "flat") return PacketSpec::Shape::flat;
    if (s == "two_gaussian") return PacketSpec::Shape::two_gaussian;
    return PacketSpec::Shape::gaussian;
}

std::string shape_name(PacketSpec::Shape s)
{
    switch (s) {
    case PacketSpec::Shape::gaussian: return "gaussian";
    case PacketSpec::Shape::flat: return "flat";
    case PacketSpec::Shape::two_gaussian: return "two_gaussian";
    }
    return "gaussian";
}

ExternalPotential read_external(Reader& r)
{
    const auto type = r.text("type", "none", {"none", "harmonic", "tabulated", "barrier"});
    if (type == "harmonic") return HarmonicPotential{r.positive("stiffness", 1.0), r.reals("center")};
    if (type == "tabulated") return TabulatedPotential{r.reals("values")};
    if (type == "barrier") {
        BarrierPotential b;
        b.position = r.real("position", 0.0);
        b.thickness = r.positive("thickness", 1.0);
        b.height = r.real("height", 1.0);
        r.objects("apertures", [&](Reader& a, std::size_t) {
            b.apertures.push_back({a.real("center", 0.0), a.positive("width", 1.0)});
        });
        return b;
    }
    return NoPotential{};
}

ordered_json external_json(const ExternalPotential& p)
{
    return std::visit(
        [](const auto& v) -> ordered_json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, HarmonicPotential>)
                return {{"type", "harmonic"}, {"stiffness", v.stiffness}, {"center", v.center}};
            else if constexpr (std::is_same_v<T, TabulatedPotential>)
                return {{"type", "tabulated"}, {"values", v.values}};
            else if constexpr (std::is_same_v<T, BarrierPotential>) {
                ordered_json aps = ordered_json::array();
                for (const auto& a : v.apertures) aps.push_back({{"center", a.center}, {"width", a.width}});
                return {{"type", "barrier"},  {"position", v.position}, {"thickness", v.thickness},
                        {"height", v.height}, {"apertures", aps}};
            } else
                return {{"type", "none"}};
        },
        p);
}

} // namespace

RunConfig parse_config(const json& doc)
{
    Reader root(doc, "config");
    RunConfig c;

    const auto version = root.count("format_version", 0);
    if (!root.has("format_version")) Reader::fail(root.at("format_version"), "missing required field");
    if (version != kConfigFormatVersion)
        Reader::fail(root.at("format_version"), "unsupported version " + std::to_string(version) + " (expected " +
                                                    std::to_string(kConfigFormatVersion) + ")");

    c.recipe = root.text("recipe", "run", recipe_names());
    c.preset = root.text("preset", "desk", {"desk", "paper-scale"});
    if (c.preset == "paper-scale") {
        // Physical constants: lambda = 1e-16 per second, 1/sqrt(alpha) = 1e-5 cm.
        c.grw.lambda_rate = 1e-16;
        c.grw.alpha = 1e10;
    }

    root.object("lattice", [&](Reader& r) {
        c.grid_points = r.count("grid_points", c.grid_points);
        c.domain_length = r.positive("domain_length", c.domain_length);
        c.base_magnitude = r.positive("base_magnitude", c.base_magnitude);
        c.base_phase = r.positive("base_phase", c.base_phase);
        c.cell_lengths = r.reals("cell_lengths");
        c.cell_scale = r.non_negative("cell_scale", 0.0);
    });

    root.objects("particles", [&](Reader& r, std::size_t) {
        ParticleSpec p;
        p.species = r.text("species", "p", {});
        p.statistics = statistics_from_string(
            r.text("statistics", "distinguishable", {"boson", "fermion", "distinguishable"}));
        p.mass = r.positive("mass", 1.0);
        const auto dim = r.count("spatial_dim", 1);
        if (dim < 1 || dim > 3) Reader::fail(r.at("spatial_dim"), "must be 1, 2 or 3");
        p.spatial_dim = static_cast<int>(dim);
        c.particles.push_back(p);
    });
    if (c.particles.empty()) Reader::fail(root.at("particles"), "at least one particle is required");

    const double dx = c.domain_length / static_cast<double>(std::max<std::size_t>(c.grid_points, 1));
    if (c.cell_lengths.empty())
        c.cell_lengths.assign(c.particles.size(), 2.0 * dx);
    else if (c.cell_lengths.size() == 1)
        c.cell_lengths.assign(c.particles.size(), c.cell_lengths[0]);
    if (c.cell_lengths.size() != c.particles.size())
        Reader::fail("config.lattice.cell_lengths", "need one entry per particle (or a single shared entry)");

    std::vector<bool> owned(c.particles.size(), false);
    root.objects("wavefunctions", [&](Reader& r, std::size_t) {
        WavefunctionSpec w;
        for (auto k : r.counts("particles")) {
            if (k >= c.particles.size()) Reader::fail(r.at("particles"), "unknown particle " + std::to_string(k));
            if (owned[k]) Reader::fail(r.at("particles"), "particle " + std::to_string(k) + " already placed");
            owned[k] = true;
            w.particles.push_back(k);
        }
        if (w.particles.empty()) Reader::fail(r.at("particles"), "must list at least one particle");
        r.objects("packets", [&](Reader& p, std::size_t i) {
            if (i >= w.particles.size()) Reader::fail(p.path(), "more packets than particles");
            const int dim = c.particles[w.particles[i]].spatial_dim;
            PacketSpec s;
            s.shape = shape_from(p.text("shape", "gaussian", {"gaussian", "flat", "two_gaussian"}));
            s.center = p.reals("center", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
            s.momentum = p.reals("momentum", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
            if (s.center.size() != static_cast<std::size_t>(dim))
                Reader::fail(p.at("center"), "needs " + std::to_string(dim) + " coordinates");
            if (s.momentum.size() != static_cast<std::size_t>(dim))
                Reader::fail(p.at("momentum"), "needs " + std::to_string(dim) + " components");
            s.width = p.positive("width", 1.0);
            s.separation = p.non_negative("separation", 0.0);
            s.cells = p.count("cells", 1);
            if (s.cells < 1) Reader::fail(p.at("cells"), "must be at least 1");
            w.packets.push_back(s);
        });
        if (w.packets.size() != w.particles.size())
            Reader::fail(r.at("packets"), "need one packet per particle");
        c.wavefunctions.push_back(w);
    });
    for (std::size_t k = 0; k < owned.size(); ++k)
        if (!owned[k] && !c.wavefunctions.empty())
            Reader::fail(root.at("wavefunctions"), "particle " + std::to_string(k) + " is in no wavefunction");

    root.object("hamiltonian", [&](Reader& r) {
        c.hamiltonian.planck = r.positive("planck", kDefaultPlanck);
        r.objects("external", [&](Reader& e, std::size_t) { c.hamiltonian.external.push_back(read_external(e)); });
        r.objects("pairs", [&](Reader& p, std::size_t) {
            PairInteraction q;
            q.first = p.count("first", 0);
            q.second = p.count("second", 1);
            const auto type = p.text("type", "gaussian_well", {"gaussian_well", "soft_coulomb"});
            if (type == "soft_coulomb")
                q.kind = SoftCoulomb{p.real("strength", 1.0), p.positive("softening", 1.0)};
            else
                q.kind = GaussianWell{p.real("depth", 1.0), p.positive("width", 1.0)};
            q.cutoff = p.positive("cutoff", std::numeric_limits<double>::infinity());
            if (q.first >= c.particles.size() || q.second >= c.particles.size() || q.first == q.second)
                Reader::fail(p.path(), "pair must name two distinct known particles");
            c.hamiltonian.pairs.push_back(q);
        });
    });
    if (!c.hamiltonian.external.empty() && c.hamiltonian.external.size() != c.particles.size())
        Reader::fail("config.hamiltonian.external", "need one entry per particle or none");

    const auto model = root.text("model", "unitary", {"unitary", "grw", "ccqm"});
    c.model = model == "grw" ? Model::grw : model == "ccqm" ? Model::ccqm : Model::unitary;

    root.object("grw", [&](Reader& r) {
        c.grw.lambda_rate = r.positive("lambda", c.grw.lambda_rate);
        c.grw.alpha = r.positive("alpha", c.grw.alpha);
    });
    root.object("ccqm", [&](Reader& r) {
        c.ccqm.v_critical = r.count("v_critical", c.ccqm.v_critical);
        c.ccqm.fraction = r.positive("fraction", c.ccqm.fraction);
        c.ccqm.split_coefficient = r.non_negative("split_coefficient", c.ccqm.split_coefficient);
        c.ccqm.split_base_probability = r.non_negative("split_base_probability", c.ccqm.split_base_probability);
        c.ccqm.check_interval = r.non_negative("check_interval", c.ccqm.check_interval);
        c.ccqm.fixed_point_epsilon = r.flag("fixed_point_epsilon", c.ccqm.fixed_point_epsilon);
    });
    root.object("registry", [&](Reader& r) {
        c.merge_coefficient = r.non_negative("merge_coefficient", 0.0);
        c.max_particles = r.count("max_particles", c.max_particles);
        c.max_grid_points = r.count("max_grid_points", c.max_grid_points);
    });
    root.object("time", [&](Reader& r) {
        c.dt = r.positive("dt", c.dt);
        c.t_end = r.non_negative("t_end", c.t_end);
    });
    c.seed = root.count("seed", c.seed);
    c.trajectories = root.count("trajectories", c.trajectories);
    c.threads = root.count("threads", c.threads);
    if (c.trajectories < 1) Reader::fail(root.at("trajectories"), "must be at least 1");
    if (c.threads < 1) Reader::fail(root.at("threads"), "must be at least 1");
    root.object("output", [&](Reader& r) {
        c.write_snapshots = r.flag("snapshots", c.write_snapshots);
        c.series_every = r.count("series_every", c.series_every);
        if (c.series_every < 1) Reader::fail(r.at("series_every"), "must be at least 1");
    });
    root.object("sweep", [&](Reader& r) {
        for (auto v : r.counts("v_critical")) c.sweep.v_critical.push_back(v);
        c.sweep.fraction = r.reals("fraction");
        c.sweep.base_magnitude = r.reals("base_magnitude");
    });
    root.finish();

    // Semantic checks reuse the library validators, tagged with a path.
    try {
        for (const auto& w : c.wavefunctions) lattice_for(c, w.particles).validate();
        LatticeSpec all;
        all.particles = c.particles;
        all.grid_points = c.grid_points;
        all.domain_length = c.domain_length;
        all.cell_lengths = c.cell_lengths;
        all.base_phase = c.base_phase;
        if (c.wavefunctions.empty()) all.validate();
        // Pair and external checks only need particle dims and the grid.
        HamiltonianSpec h = c.hamiltonian;
        for (const auto& p : h.pairs)
            if (c.particles[p.first].spatial_dim != c.particles[p.second].spatial_dim)
                throw ConfigError("pair between particles of different dimension");
        for (std::size_t k = 0; k < h.external.size(); ++k) {
            HamiltonianSpec one;
            one.external = {h.external[k]};
            one.planck = h.planck;
            LatticeSpec l1;
            l1.particles = {c.particles[k]};
            l1.grid_points = c.grid_points;
            l1.domain_length = c.domain_length;
            l1.cell_lengths = {c.cell_lengths[k]};
            l1.base_phase = c.base_phase;
            one.validate(l1);
        }
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    try {
        c.grw.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config.grw: ") + e.what());
    }
    try {
        c.ccqm.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config.ccqm: ") + e.what());
    }
    if (c.model == Model::ccqm && c.cell_scale > 0.0)
        for (const auto& w : c.wavefunctions)
            for (const auto& p : w.packets)
                if (p.shape == PacketSpec::Shape::flat)
                    Reader::fail("config.lattice.cell_scale", "flat packets need explicit cell lengths");
    return c;
}

RunConfig parse_config_text(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(doc);
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

ordered_json RunConfig::to_json() const
{
    ordered_json j;
    j["format_version"] = kConfigFormatVersion;
    j["recipe"] = recipe;
    j["preset"] = preset;
    j["lattice"] = {{"grid_points", grid_points},       {"domain_length", domain_length},
                    {"base_magnitude", base_magnitude}, {"base_phase", base_phase},
                    {"cell_lengths", cell_lengths},     {"cell_scale", cell_scale}};
    auto& ps = j["particles"] = ordered_json::array();
    for (const auto& p : particles)
        ps.push_back({{"species", p.species},
                      {"statistics", ccqm::to_string(p.statistics)},
                      {"mass", p.mass},
                      {"spatial_dim", p.spatial_dim}});
    auto& ws = j["wavefunctions"] = ordered_json::array();
    for (const auto& w : wavefunctions) {
        ordered_json packets = ordered_json::array();
        for (const auto& p : w.packets)
            packets.push_back({{"shape", shape_name(p.shape)},
                               {"center", p.center},
                               {"width", p.width},
                               {"momentum", p.momentum},
                               {"separation", p.separation},
                               {"cells", p.cells}});
        ws.push_back({{"particles", w.particles}, {"packets", packets}});
    }
    ordered_json ext = ordered_json::array();
    for (const auto& e : hamiltonian.external) ext.push_back(external_json(e));
    ordered_json pairs = ordered_json::array();
    for (const auto& p : hamiltonian.pairs) {
        ordered_json q{{"first", p.first}, {"second", p.second}};
        if (const auto* w = std::get_if<GaussianWell>(&p.kind)) {
            q["type"] = "gaussian_well";
            q["depth"] = w->depth;
            q["width"] = w->width;
        } else {
            const auto& s = std::get<SoftCoulomb>(p.kind);
            q["type"] = "soft_coulomb";
            q["strength"] = s.strength;
            q["softening"] = s.softening;
        }
        if (std::isfinite(p.cutoff)) q["cutoff"] = p.cutoff;
        pairs.push_back(q);
    }
    j["hamiltonian"] = {{"planck", hamiltonian.planck}, {"external", ext}, {"pairs", pairs}};
    j["model"] = to_string(model);
    j["grw"] = {{"lambda", grw.lambda_rate}, {"alpha", grw.alpha}};
    j["ccqm"] = {{"v_critical", ccqm.v_critical},
                 {"fraction", ccqm.fraction},
                 {"split_coefficient", ccqm.split_coefficient},
                 {"split_base_probability", ccqm.split_base_probability},
                 {"check_interval", ccqm.check_interval},
                 {"fixed_point_epsilon", ccqm.fixed_point_epsilon}};
    j["registry"] = {
        {"merge_coefficient", merge_coefficient}, {"max_particles", max_particles}, {"max_grid_points", max_grid_points}};
    j["time"] = {{"dt", dt}, {"t_end", t_end}};
    j["seed"] = seed;
    j["trajectories"] = trajectories;
    j["threads"] = threads;
    j["output"] = {{"snapshots", write_snapshots}, {"series_every", series_every}};
    j["sweep"] = {
        {"v_critical", sweep.v_critical}, {"fraction", sweep.fraction}, {"base_magnitude", sweep.base_magnitude}};
    return j;
}

std::uint64_t config_hash(const RunConfig& config)
{
    // Thread count does not affect results, so it is left out.
    auto j = config.to_json();
    j.erase("threads");
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

LatticeSpec lattice_for(const RunConfig& config, const std::vector<std::size_t>& particles)
{
    LatticeSpec lat;
    lat.grid_points = config.grid_points;
    lat.domain_length = config.domain_length;
    lat.base_phase = config.base_phase;
    std::size_t axes = 0;
    for (auto k : particles) {
        lat.particles.push_back(config.particles.at(k));
        lat.cell_lengths.push_back(config.cell_lengths.at(k));
        axes += static_cast<std::size_t>(config.particles[k].spatial_dim);
    }
    // The configured magnitude is per configuration-space axis.
    lat.base_magnitude = std::pow(config.base_magnitude, static_cast<double>(axes));
    return lat;
}

std::vector<Complex> tabulate_packet(const LatticeSpec& lattice, int dim, const PacketSpec& packet,
                                     std::size_t cell_points)
{
    const std::size_t m = lattice.grid_points;
    const GridIndexer sub(m, static_cast<std::size_t>(dim));
    std::vector<Complex> out(sub.size());
    std::vector<std::size_t> idx(static_cast<std::size_t>(dim));
    const double len = lattice.domain_length;
    for (std::size_t flat = 0; flat < sub.size(); ++flat) {
        sub.decode(flat, idx);
        double phase = 0.0;
        for (int d = 0; d < dim; ++d) phase += packet.momentum[d] * lattice.coordinate(idx[d]);
        double mag = 0.0;
        switch (packet.shape) {
        case PacketSpec::Shape::gaussian: {
            double r2 = 0.0;
            for (int d = 0; d < dim; ++d) {
                const double delta = periodic_delta(lattice.coordinate(idx[d]), packet.center[d], len);
                r2 += delta * delta;
            }
            mag = std::exp(-r2 / (4.0 * packet.width * packet.width));
            break;
        }
        case PacketSpec::Shape::two_gaussian: {
            double r2a = 0.0, r2b = 0.0;
            for (int d = 0; d < dim; ++d) {
                const double shift = d == 0 ? packet.separation / 2.0 : 0.0;
                const double da = periodic_delta(lattice.coordinate(idx[d]), packet.center[d] - shift, len);
                const double db = periodic_delta(lattice.coordinate(idx[d]), packet.center[d] + shift, len);
                r2a += da * da;
                r2b += db * db;
            }
            const double s2 = 4.0 * packet.width * packet.width;
            mag = std::exp(-r2a / s2) + std::exp(-r2b / s2);
            break;
        }
        case PacketSpec::Shape::flat: {
            bool inside = true;
            for (int d = 0; d < dim; ++d) inside = inside && idx[d] < packet.cells * cell_points;
            mag = inside ? 1.0 : 0.0;
            break;
        }
        }
        out[flat] = std::polar(mag, phase);
    }
    return out;
}

ConfigField initial_field(const RunConfig& config, const WavefunctionSpec& wf)
{
    LatticeSpec lat = lattice_for(config, wf.particles);
    const double dx = lat.spacing();
    if (config.cell_scale > 0.0)
        for (auto& a : lat.cell_lengths) a = dx;
    lat.validate();

    std::vector<std::vector<Complex>> orbitals;
    for (std::size_t i = 0; i < wf.particles.size(); ++i)
        orbitals.push_back(tabulate_packet(lat, lat.particles[i].spatial_dim, wf.packets[i], lat.cell_points(i)));
    ConfigField field = symmetrized_sum(product_state(lat, orbitals));
    normalize(field);

    if (config.cell_scale > 0.0) {
        for (std::size_t i = 0; i < wf.particles.size(); ++i) {
            const double a = de_broglie_cell_length(field, i, config.cell_scale, config.hamiltonian.planck);
            // Cells must tile the grid: round down to a power-of-two multiple of dx.
            std::size_t pts = 1;
            while (pts * 2 <= lat.grid_points && static_cast<double>(pts * 2) * dx <= a * (1.0 + 1e-12)) pts *= 2;
            field.lattice.cell_lengths[i] = static_cast<double>(pts) * dx;
        }
        field.lattice.validate();
    }
    return field;
}

const std::vector<std::string>& recipe_names()
{
    static const std::vector<std::string> names{"run",           "free-spread-ccqm", "exp-growth",
                                                "grw-rates",     "symmetry-compare", "double-slit",
                                                "merge-then-collapse", "sweep"};
    return names;
}

namespace {

const char* kRecipeDefaults[] = {
    // run
    R"({"format_version":1,"recipe":"run",
        "lattice":{"grid_points":256,"domain_length":64.0,"base_magnitude":0.05,"cell_lengths":[0.5]},
        "particles":[{"species":"e","statistics":"distinguishable","mass":1.0,"spatial_dim":1}],
        "wavefunctions":[{"particles":[0],"packets":[{"shape":"gaussian","center":[0.0],"width":1.0}]}],
        "model":"unitary","time":{"dt":0.05,"t_end":2.0},"seed":1})",
    // free-spread-ccqm
    R"({"format_version":1,"recipe":"free-spread-ccqm",
        "lattice":{"grid_points":256,"domain_length":64.0,"base_magnitude":0.05,"cell_lengths":[0.5]},
        "particles":[{"species":"e","statistics":"distinguishable","mass":1.0,"spatial_dim":1}],
        "wavefunctions":[{"particles":[0],"packets":[{"shape":"gaussian","center":[0.0],"width":1.0}]}],
        "model":"ccqm","ccqm":{"v_critical":24,"fraction":0.5},
        "time":{"dt":0.05,"t_end":40.0},"seed":7})",
    // exp-growth
    R"({"format_version":1,"recipe":"exp-growth",
        "lattice":{"grid_points":32,"domain_length":16.0,"base_magnitude":0.05,"cell_lengths":[1.0]},
        "particles":[{"species":"e","statistics":"distinguishable","mass":1.0,"spatial_dim":1}],
        "wavefunctions":[{"particles":[0],"packets":[{"shape":"flat","cells":8}]}],
        "model":"unitary","time":{"dt":0.05,"t_end":0.0},"seed":1})",
    // grw-rates
    R"({"format_version":1,"recipe":"grw-rates",
        "lattice":{"grid_points":512,"domain_length":128.0,"base_magnitude":0.05,"cell_lengths":[2.0]},
        "particles":[{"species":"e","mass":1.0},{"species":"e","mass":1.0},{"species":"e","mass":1.0}],
        "wavefunctions":[{"particles":[0],"packets":[{"center":[-32.0],"width":2.0}]},
                         {"particles":[1],"packets":[{"center":[0.0],"width":2.0}]},
                         {"particles":[2],"packets":[{"center":[32.0],"width":2.0}]}],
        "hamiltonian":{"external":[{"type":"harmonic","stiffness":1.0,"center":[-32.0]},
                                   {"type":"harmonic","stiffness":1.0,"center":[0.0]},
                                   {"type":"harmonic","stiffness":1.0,"center":[32.0]}]},
        "model":"grw","grw":{"lambda":1.0,"alpha":0.05},
        "time":{"dt":0.1,"t_end":200.0},"seed":3,"output":{"series_every":100}})",
    // symmetry-compare
    R"({"format_version":1,"recipe":"symmetry-compare",
        "lattice":{"grid_points":128,"domain_length":32.0,"base_magnitude":0.1,"cell_lengths":[1.0,1.0]},
        "particles":[{"species":"e","statistics":"fermion","mass":1.0},{"species":"e","statistics":"fermion","mass":1.0}],
        "wavefunctions":[{"particles":[0,1],"packets":[{"center":[-2.0],"width":1.2},{"center":[2.0],"width":1.2}]}],
        "model":"ccqm","grw":{"lambda":1.0,"alpha":1.0},"ccqm":{"v_critical":4,"fraction":0.5},
        "time":{"dt":0.05,"t_end":0.0},"seed":11})",
    // double-slit
    R"({"format_version":1,"recipe":"double-slit",
        "lattice":{"grid_points":1024,"domain_length":320.0,"base_magnitude":0.03,"cell_lengths":[1.25]},
        "particles":[{"species":"e","statistics":"distinguishable","mass":1.0,"spatial_dim":1}],
        "wavefunctions":[{"particles":[0],"packets":[{"shape":"two_gaussian","center":[0.0],"width":1.0,"separation":8.0}]}],
        "model":"ccqm","ccqm":{"v_critical":100000,"fraction":0.5},
        "time":{"dt":0.1,"t_end":20.0},"seed":5,"trajectories":200,
        "sweep":{"v_critical":[100000,32,28,24]},"output":{"snapshots":false,"series_every":50}})",
    // merge-then-collapse
    R"({"format_version":1,"recipe":"merge-then-collapse",
        "lattice":{"grid_points":128,"domain_length":32.0,"base_magnitude":0.05,"cell_lengths":[1.0]},
        "particles":[{"species":"a","mass":1.0},{"species":"b","mass":1.0}],
        "wavefunctions":[{"particles":[0],"packets":[{"center":[-1.0],"width":1.5}]},
                         {"particles":[1],"packets":[{"center":[1.0],"width":1.5}]}],
        "hamiltonian":{"pairs":[{"first":0,"second":1,"type":"gaussian_well","depth":0.2,"width":2.0}]},
        "model":"ccqm","ccqm":{"v_critical":12,"fraction":0.5,"split_coefficient":1000.0,"split_base_probability":1.0},
        "registry":{"merge_coefficient":1000000.0},
        "time":{"dt":0.05,"t_end":1.0},"seed":10})",
    // sweep
    R"({"format_version":1,"recipe":"sweep",
        "lattice":{"grid_points":512,"domain_length":128.0,"base_magnitude":0.05,"cell_lengths":[0.5]},
        "particles":[{"species":"e","statistics":"distinguishable","mass":1.0,"spatial_dim":1}],
        "wavefunctions":[{"particles":[0],"packets":[{"shape":"gaussian","center":[0.0],"width":1.0}]}],
        "model":"ccqm","ccqm":{"v_critical":24,"fraction":0.5},
        "time":{"dt":0.05,"t_end":6.0},"seed":13,
        "sweep":{"v_critical":[16,32],"fraction":[0.3,0.5],"base_magnitude":[0.05]}})",
};

} // namespace

RunConfig recipe_defaults(const std::string& recipe)
{
    const auto& names = recipe_names();
    const auto it = std::find(names.begin(), names.end(), recipe);
    if (it == names.end()) throw ConfigError("unknown recipe '" + recipe + "'");
    return parse_config_text(kRecipeDefaults[it - names.begin()]);
}

ordered_json config_schema()
{
    auto num = [](const char* desc) { return ordered_json{{"type", "number"}, {"description", desc}}; };
    auto integer = [](const char* desc) {
        return ordered_json{{"type", "integer"}, {"minimum", 0}, {"description", desc}};
    };
    auto numbers = [](const char* desc) {
        return ordered_json{{"type", "array"}, {"items", {{"type", "number"}}}, {"description", desc}};
    };
    auto strict = [](ordered_json props) {
        return ordered_json{{"type", "object"}, {"additionalProperties", false}, {"properties", std::move(props)}};
    };

    ordered_json packet = strict({
        {"shape", {{"enum", {"gaussian", "flat", "two_gaussian"}}}},
        {"center", numbers("packet center (two_gaussian: midpoint), one entry per spatial axis")},
        {"width", num("Gaussian sigma of |psi|^2")},
        {"momentum", numbers("wavevector k of the plane-wave factor exp(i k.x)")},
        {"separation", num("two_gaussian: distance between the two lobes along the first axis")},
        {"cells", integer("flat: reference cells per axis, starting at grid index 0")},
    });
    ordered_json external = strict({
        {"type", {{"enum", {"none", "harmonic", "tabulated", "barrier"}}}},
        {"stiffness", num("harmonic: V = stiffness |x - center|^2 / 2")},
        {"center", numbers("harmonic center")},
        {"values", numbers("tabulated: values on the particle's sub-grid")},
        {"position", num("barrier: slab position along the first axis")},
        {"thickness", num("barrier: slab thickness")},
        {"height", num("barrier: potential height")},
        {"apertures",
         {{"type", "array"},
          {"items", strict({{"center", num("aperture center on the second axis")}, {"width", num("aperture width")}})}}},
    });
    ordered_json pair = strict({
        {"first", integer("particle index")},
        {"second", integer("particle index")},
        {"type", {{"enum", {"gaussian_well", "soft_coulomb"}}}},
        {"depth", num("gaussian_well: V = -depth exp(-r^2 / (2 width^2))")},
        {"width", num("gaussian_well width")},
        {"strength", num("soft_coulomb: V = strength / sqrt(r^2 + softening^2)")},
        {"softening", num("soft_coulomb softening length")},
        {"cutoff", num("interaction vanishes beyond this separation")},
    });

    ordered_json s = strict({
        {"format_version", {{"const", kConfigFormatVersion}}},
        {"recipe", {{"enum", recipe_names()}}},
        {"preset",
         {{"enum", {"desk", "paper-scale"}},
          {"description", "paper-scale sets lambda = 1e-16 and alpha = 1e10 (event-free at desk horizons)"}}},
        {"lattice", strict({
                        {"grid_points", integer("M, points per axis, power of two")},
                        {"domain_length", num("L, periodic domain [-L/2, L/2)")},
                        {"base_magnitude", num("f_0 per configuration-space axis; a D-axis field uses f_0^D")},
                        {"base_phase", num("theta_0, must divide 2 pi")},
                        {"cell_lengths", numbers("a_k per particle (or one shared value); whole multiples of dx")},
                        {"cell_scale", num("if > 0, a_k = cell_scale * mean de Broglie wavelength")},
                    })},
        {"particles",
         {{"type", "array"},
          {"minItems", 1},
          {"items", strict({
                        {"species", {{"type", "string"}}},
                        {"statistics", {{"enum", {"boson", "fermion", "distinguishable"}}}},
                        {"mass", num("particle mass")},
                        {"spatial_dim", {{"enum", {1, 2, 3}}}},
                    })}}},
        {"wavefunctions",
         {{"type", "array"},
          {"items", strict({
                        {"particles", {{"type", "array"}, {"items", {{"type", "integer"}}}}},
                        {"packets", {{"type", "array"}, {"items", packet}}},
                    })}}},
        {"hamiltonian", strict({
                            {"planck", num("simulation Planck constant h (hbar = h / 2 pi)")},
                            {"external", {{"type", "array"}, {"items", external}}},
                            {"pairs", {{"type", "array"}, {"items", pair}}},
                        })},
        {"model", {{"enum", {"unitary", "grw", "ccqm"}}}},
        {"grw", strict({{"lambda", num("hit rate per particle")}, {"alpha", num("inverse squared localization width")}})},
        {"ccqm", strict({
                     {"v_critical", integer("critical relative volume")},
                     {"fraction", num("F, target ratio of post- to pre-collapse volume, in (0, 1)")},
                     {"split_coefficient", num("kappa; 0 disables splitting")},
                     {"split_base_probability", num("p_0 in [0, 1]")},
                     {"check_interval", num("simulated time between criticality checks; 0 checks every tick")},
                     {"fixed_point_epsilon", {{"type", "boolean"}}},
                 })},
        {"registry", strict({
                         {"merge_coefficient", num("beta in p = 1 - exp(-beta I dt)")},
                         {"max_particles", integer("merges above this particle count are deferred")},
                         {"max_grid_points", integer("merges above this joint grid size are deferred")},
                     })},
        {"time", strict({{"dt", num("tick length")}, {"t_end", num("final time")}})},
        {"seed", integer("root seed")},
        {"trajectories", integer("independent trajectories (streams derived from the seed)")},
        {"threads", integer("worker threads; does not change results")},
        {"output", strict({{"snapshots", {{"type", "boolean"}}}, {"series_every", integer("ticks between CSV rows")}})},
        {"sweep", strict({
                      {"v_critical", {{"type", "array"}, {"items", {{"type", "integer"}}}}},
                      {"fraction", numbers("F values")},
                      {"base_magnitude", numbers("f_0 values")},
                  })},
    });
    s["required"] = {"format_version", "particles"};
    ordered_json doc;
    doc["$schema"] = "https://json-schema.org/draft/2020-12/schema";
    doc["title"] = "ccqm run configuration";
    for (auto& [k, v] : s.items()) doc[k] = v;
    return doc;
}

} // namespace ccqm
