#include "ccqm/registry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ccqm/errors.hpp"
#include "ccqm/snapshot.hpp"
#include "ccqm/symmetry.hpp"
#include "logging.hpp"

namespace ccqm {

namespace {

/// |V| integrated against g_i(x) g_j(y) over both particle sub-grids.
double marginal_pair_integral(const ConfigField& f1, std::size_t i, const ConfigField& f2, std::size_t j,
                              const PairInteraction& pair)
{
    const auto& lat = f1.lattice;
    const auto dim = static_cast<std::size_t>(lat.particles[i].spatial_dim);
    const std::size_t m = lat.grid_points;
    const auto g1 = marginal_density(f1, i);
    const auto g2 = marginal_density(f2, j);
    const double dx = lat.spacing();

    // |V| as a function of the periodic offset between the two sub-grid points.
    const GridIndexer sub(m, dim);
    std::vector<double> v_of_offset(sub.size());
    std::vector<std::size_t> o(dim);
    for (std::size_t flat = 0; flat < sub.size(); ++flat) {
        sub.decode(flat, o);
        double r2 = 0.0;
        for (auto c : o) {
            const double delta = periodic_delta(static_cast<double>(c) * dx, 0.0, lat.domain_length);
            r2 += delta * delta;
        }
        v_of_offset[flat] = std::abs(pair(std::sqrt(r2)));
    }

    std::vector<std::size_t> xi(dim), yi(dim), oi(dim);
    double acc = 0.0;
    for (std::size_t x = 0; x < g1.size(); ++x) {
        if (g1[x] == 0.0) continue;
        sub.decode(x, xi);
        double inner = 0.0;
        for (std::size_t y = 0; y < g2.size(); ++y) {
            if (g2[y] == 0.0) continue;
            sub.decode(y, yi);
            for (std::size_t d = 0; d < dim; ++d) oi[d] = (xi[d] + m - yi[d]) % m;
            inner += g2[y] * v_of_offset[sub.encode(oi)];
        }
        acc += g1[x] * inner;
    }
    const double measure = std::pow(dx, static_cast<double>(dim));
    return acc * measure * measure;
}

} // namespace

double cross_interaction(const ConfigField& f1, const ConfigField& f2, const std::vector<PairInteraction>& pairs)
{
    const std::size_t n1 = f1.lattice.particle_count();
    const std::size_t n2 = f2.lattice.particle_count();
    double total = 0.0;
    for (const auto& p : pairs) {
        std::size_t a = p.first;
        std::size_t b = p.second;
        if (a >= n1 + n2 || b >= n1 + n2) throw ConfigError("pair index out of range for merge");
        if ((a < n1) == (b < n1)) continue; // not a cross pair
        if (a >= n1) std::swap(a, b);
        if (f1.lattice.particles[a].spatial_dim != f2.lattice.particles[b - n1].spatial_dim)
            throw ConfigError("cross pair between particles of different dimension");
        total += marginal_pair_integral(f1, a, f2, b - n1, p);
    }
    return total;
}

double merge_probability(const ConfigField& f1, const ConfigField& f2, const std::vector<PairInteraction>& pairs,
                         double dt, double beta)
{
    if (beta <= 0.0 || dt <= 0.0) return 0.0;
    const double interaction = cross_interaction(f1, f2, pairs);
    return 1.0 - std::exp(-beta * interaction * dt);
}

ConfigField symmetrized_product(const ConfigField& f1, const ConfigField& f2)
{
    const auto& l1 = f1.lattice;
    const auto& l2 = f2.lattice;
    if (l1.grid_points != l2.grid_points || l1.domain_length != l2.domain_length)
        throw ConfigError("merge needs fields on the same grid");
    if (l1.base_phase != l2.base_phase) throw ConfigError("merge needs a common base phase");

    LatticeSpec joint;
    joint.grid_points = l1.grid_points;
    joint.domain_length = l1.domain_length;
    joint.base_phase = l1.base_phase;
    joint.base_magnitude = l1.base_magnitude * l2.base_magnitude;
    joint.particles = l1.particles;
    joint.particles.insert(joint.particles.end(), l2.particles.begin(), l2.particles.end());
    joint.cell_lengths = l1.cell_lengths;
    joint.cell_lengths.insert(joint.cell_lengths.end(), l2.cell_lengths.begin(), l2.cell_lengths.end());

    ConfigField product = ConfigField::zeros(joint, f1.time);
    const std::size_t n2 = f2.amplitudes.size();
    for (std::size_t i = 0; i < f1.amplitudes.size(); ++i)
        for (std::size_t j = 0; j < n2; ++j) product.amplitudes[i * n2 + j] = f1.amplitudes[i] * f2.amplitudes[j];
    return symmetrized_sum(product);
}

ConfigField merge(const ConfigField& f1, const ConfigField& f2)
{
    ConfigField merged = symmetrized_product(f1, f2);
    const double scale = norm_squared(f1) * norm_squared(f2);
    if (!(norm_squared(merged) > 1e-20 * scale))
        throw MergeAborted("symmetrized product vanishes (identical fermions in the same state)");
    normalize(merged);
    return merged;
}

Registry::Registry(std::vector<ParticleSpec> particles, HamiltonianSpec global_h, std::uint64_t seed)
    : particles_(std::move(particles)), hamiltonian_(std::move(global_h)), seed_(seed)
{
}

std::uint64_t Registry::add(ConfigField field, std::vector<std::size_t> particles)
{
    field.lattice.validate();
    if (particles.size() != field.lattice.particle_count())
        throw ConfigError("particle list does not match the field");
    for (std::size_t k = 0; k < particles.size(); ++k) {
        if (particles[k] >= particles_.size()) throw ConfigError("unknown global particle index");
        if (!identical(particles_[particles[k]], field.lattice.particles[k]))
            throw ConfigError("field particle " + std::to_string(k) + " does not match the registry");
        for (const auto& wf : wavefunctions_)
            if (std::find(wf.particles.begin(), wf.particles.end(), particles[k]) != wf.particles.end())
                throw ConfigError("particle already belongs to a wavefunction");
    }
    if (std::abs(norm_squared(field) - 1.0) > 1e-9) throw ConfigError("registry members must be normalized");
    if (wavefunctions_.empty() && events_.empty())
        time_ = field.time;
    else if (std::abs(field.time - time_) > 1e-12)
        throw ConfigError("registry members must share the global time");

    Wavefunction wf;
    wf.id = next_id_++;
    wf.particles = std::move(particles);
    wf.next_check = field.time;
    wf.field = std::move(field);
    wavefunctions_.push_back(std::move(wf));
    return wavefunctions_.back().id;
}

std::size_t Registry::particle_total() const
{
    std::size_t n = 0;
    for (const auto& wf : wavefunctions_) n += wf.particles.size();
    return n;
}

HamiltonianSpec Registry::local_hamiltonian(const Wavefunction& wf) const
{
    return hamiltonian_.restricted(wf.particles);
}

const Propagator& Registry::propagator_for(const Wavefunction& wf, double dt)
{
    auto it = propagators_.find(wf.id);
    if (it == propagators_.end() || it->second.dt() != dt || !it->second.compatible(wf.field.lattice)) {
        propagators_.erase(wf.id);
        it = propagators_.emplace(wf.id, Propagator(wf.field.lattice, local_hamiltonian(wf), dt)).first;
    }
    return it->second;
}

void Registry::evolve_member(Wavefunction& wf, double t_target, double dt)
{
    const double span = t_target - wf.field.time;
    if (span <= 0.0) return;
    if (span == dt)
        propagator_for(wf, dt).step(wf.field);
    else
        Propagator(wf.field.lattice, local_hamiltonian(wf), span).step(wf.field);
    wf.field.time = t_target;
}

namespace {

std::vector<PairInteraction> cross_pairs(const HamiltonianSpec& h, const std::vector<std::size_t>& a,
                                         const std::vector<std::size_t>& b)
{
    auto pos = [](const std::vector<std::size_t>& v, std::size_t x) -> std::ptrdiff_t {
        auto it = std::find(v.begin(), v.end(), x);
        return it == v.end() ? -1 : it - v.begin();
    };
    std::vector<PairInteraction> out;
    for (const auto& p : h.pairs) {
        std::ptrdiff_t i = pos(a, p.first);
        std::ptrdiff_t j = pos(b, p.second);
        if (i < 0 || j < 0) {
            i = pos(a, p.second);
            j = pos(b, p.first);
        }
        if (i < 0 || j < 0) continue;
        PairInteraction q = p;
        q.first = static_cast<std::size_t>(i);
        q.second = a.size() + static_cast<std::size_t>(j);
        out.push_back(q);
    }
    return out;
}

} // namespace

void tick(Registry& reg, double dt, const std::optional<GrwParams>& grw, const std::optional<CcqmParams>& ccqm,
          RngStream& rng)
{
    if (grw && ccqm) throw ConfigError("enable at most one collapse model");
    if (!(dt > 0.0)) throw ConfigError("tick needs a positive dt");
    if (grw) grw->validate();
    if (ccqm) ccqm->validate();

    const double t0 = reg.time_;
    const double t1 = t0 + dt;
    const std::size_t first_event = reg.events_.size();

    for (auto& wf : reg.wavefunctions_) {
        if (grw) {
            const auto hits = sample_hit_schedule(wf.particles.size(), grw->lambda_rate, dt, rng);
            for (const auto& hit : hits) {
                reg.evolve_member(wf, t0 + hit.time, dt);
                auto r = grw_hit(wf.field, hit.particle, grw->alpha, rng);
                r.event.particle_index = wf.particles[hit.particle];
                r.event.wavefunctions = {wf.id};
                wf.field = std::move(r.field);
                reg.events_.push_back(std::move(r.event));
            }
        }
        reg.evolve_member(wf, t1, dt);
    }
    reg.time_ = t1;
    // Hits of different members interleave in time.
    std::stable_sort(reg.events_.begin() + static_cast<std::ptrdiff_t>(first_event), reg.events_.end(),
                     [](const CollapseEvent& a, const CollapseEvent& b) { return a.time < b.time; });
    if (!ccqm) return;

    // Merge proposals, ascending pair order, each member merging at most once.
    if (reg.merge_coefficient > 0.0) {
        std::vector<std::uint64_t> consumed;
        auto is_consumed = [&](std::uint64_t id) {
            return std::find(consumed.begin(), consumed.end(), id) != consumed.end();
        };
        const std::size_t count = reg.wavefunctions_.size();
        std::vector<Wavefunction> created;
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t j = i + 1; j < count; ++j) {
                const auto& a = reg.wavefunctions_[i];
                const auto& b = reg.wavefunctions_[j];
                if (is_consumed(a.id) || is_consumed(b.id)) continue;
                const auto pairs = cross_pairs(reg.hamiltonian_, a.particles, b.particles);
                if (pairs.empty()) continue;
                const double p = merge_probability(a.field, b.field, pairs, dt, reg.merge_coefficient);
                if (!(p > 0.0)) continue;
                if (!(rng.uniform() < p)) continue;

                CollapseEvent ev;
                ev.time = t1;
                ev.width_param = p;
                ev.v_before = relative_volume(a.field) + relative_volume(b.field);
                ev.seed = rng.seed();
                ev.wavefunctions = {a.id, b.id};
                const std::size_t n_total = a.particles.size() + b.particles.size();
                const double grid_total = static_cast<double>(a.field.amplitudes.size()) *
                                          static_cast<double>(b.field.amplitudes.size());
                if (n_total > reg.limits.max_particles ||
                    grid_total > static_cast<double>(reg.limits.max_grid_points)) {
                    ev.model = EventModel::deferred_merge;
                    ev.v_after = ev.v_before;
                    reg.events_.push_back(std::move(ev));
                    continue;
                }
                try {
                    Wavefunction w;
                    w.field = merge(a.field, b.field);
                    w.id = reg.next_id_++;
                    w.particles = a.particles;
                    w.particles.insert(w.particles.end(), b.particles.begin(), b.particles.end());
                    w.next_check = t1;
                    ev.model = EventModel::merge;
                    ev.v_after = relative_volume(w.field);
                    ev.wavefunctions.push_back(w.id);
                    consumed.push_back(a.id);
                    consumed.push_back(b.id);
                    created.push_back(std::move(w));
                    reg.events_.push_back(std::move(ev));
                } catch (const MergeAborted& e) {
                    log::info(std::string("merge aborted: ") + e.what());
                }
            }
        }
        if (!consumed.empty()) {
            std::erase_if(reg.wavefunctions_, [&](const Wavefunction& w) { return is_consumed(w.id); });
            for (auto id : consumed) reg.propagators_.erase(id);
            for (auto& w : created) reg.wavefunctions_.push_back(std::move(w));
        }
    }

    auto collapse_until_subcritical = [&](Wavefunction& wf) {
        for (int round = 0; round < 8 && check_critical(wf.field, *ccqm); ++round) {
            auto out = apply_ccqm_collapse(wf.field, *ccqm, rng, wf.last_epsilon);
            wf.last_epsilon = out.solution.epsilon;
            out.event.wavefunctions = {wf.id};
            wf.field = std::move(out.field);
            reg.events_.push_back(std::move(out.event));
        }
    };

    std::vector<Wavefunction> next;
    for (auto& wf : reg.wavefunctions_) {
        if (t1 + 1e-12 * std::max(1.0, std::abs(t1)) < wf.next_check) {
            next.push_back(std::move(wf));
            continue;
        }
        wf.next_check = t1 + ccqm->check_interval;
        const std::size_t v = relative_volume(wf.field);
        if (v < ccqm->v_critical) {
            next.push_back(std::move(wf));
            continue;
        }
        const auto local_h = reg.local_hamiltonian(wf);
        const auto decision = decide_split(wf.field, local_h, *ccqm, rng);
        std::vector<ConfigField> pieces;
        if (!decision.trivial()) pieces = perform_split(wf.field, decision.partition);
        if (pieces.size() > 1) {
            CollapseEvent ev;
            ev.time = t1;
            ev.model = EventModel::split;
            ev.v_before = v;
            ev.seed = rng.seed();
            ev.wavefunctions = {wf.id};
            std::vector<Wavefunction> fresh;
            for (std::size_t b = 0; b < pieces.size(); ++b) {
                auto block = decision.partition[b];
                std::sort(block.begin(), block.end());
                Wavefunction w;
                w.id = reg.next_id_++;
                for (auto k : block) w.particles.push_back(wf.particles[k]);
                w.field = std::move(pieces[b]);
                w.next_check = wf.next_check;
                ev.v_after += relative_volume(w.field);
                ev.wavefunctions.push_back(w.id);
                fresh.push_back(std::move(w));
            }
            reg.events_.push_back(std::move(ev));
            reg.propagators_.erase(wf.id);
            for (auto& w : fresh) {
                collapse_until_subcritical(w);
                next.push_back(std::move(w));
            }
        } else {
            collapse_until_subcritical(wf);
            next.push_back(std::move(wf));
        }
    }
    reg.wavefunctions_ = std::move(next);
}

void Registry::write_checkpoint(const std::filesystem::path& dir, std::uint64_t config_hash,
                                const RngStream& rng) const
{
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json index;
    index["format_version"] = 1;
    index["global_time"] = time_;
    index["config_hash"] = config_hash;
    index["seed"] = seed_;
    index["rng_state"] = rng.state();
    index["next_id"] = next_id_;
    index["merge_coefficient"] = merge_coefficient;
    auto& parts = index["particles"] = nlohmann::ordered_json::array();
    for (const auto& p : particles_)
        parts.push_back({{"species", p.species},
                         {"statistics", to_string(p.statistics)},
                         {"mass", p.mass},
                         {"spatial_dim", p.spatial_dim}});
    auto& members = index["wavefunctions"] = nlohmann::ordered_json::array();
    for (const auto& wf : wavefunctions_) {
        const std::string file = "wf_" + std::to_string(wf.id) + ".ccqm";
        write_snapshot(dir / file, wf.field);
        nlohmann::ordered_json m;
        m["id"] = wf.id;
        m["file"] = file;
        m["particles"] = wf.particles;
        m["next_check"] = wf.next_check;
        if (wf.last_epsilon)
            m["last_epsilon"] = *wf.last_epsilon;
        else
            m["last_epsilon"] = nullptr;
        members.push_back(std::move(m));
    }
    std::ofstream out(dir / "index.json");
    out << index.dump(2) << '\n';
    if (!out) throw Error("failed writing checkpoint index");
}

std::pair<Registry, RngStream> Registry::read_checkpoint(const std::filesystem::path& dir, HamiltonianSpec global_h)
{
    std::ifstream in(dir / "index.json");
    if (!in) throw ConfigError("missing checkpoint index in " + dir.string());
    nlohmann::json index;
    try {
        index = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint index: ") + e.what());
    }
    std::vector<ParticleSpec> parts;
    for (const auto& p : index.at("particles")) {
        ParticleSpec s;
        s.species = p.at("species").get<std::string>();
        s.statistics = statistics_from_string(p.at("statistics").get<std::string>());
        s.mass = p.at("mass").get<double>();
        s.spatial_dim = p.at("spatial_dim").get<int>();
        parts.push_back(s);
    }
    Registry reg(parts, std::move(global_h), index.at("seed").get<std::uint64_t>());
    reg.time_ = index.at("global_time").get<double>();
    reg.next_id_ = index.at("next_id").get<std::uint64_t>();
    reg.merge_coefficient = index.at("merge_coefficient").get<double>();
    for (const auto& m : index.at("wavefunctions")) {
        Wavefunction wf;
        wf.id = m.at("id").get<std::uint64_t>();
        wf.particles = m.at("particles").get<std::vector<std::size_t>>();
        std::vector<ParticleSpec> specs;
        for (auto k : wf.particles) specs.push_back(parts.at(k));
        wf.field = read_snapshot(dir / m.at("file").get<std::string>(), specs);
        wf.next_check = m.at("next_check").get<double>();
        if (!m.at("last_epsilon").is_null()) wf.last_epsilon = m.at("last_epsilon").get<double>();
        reg.wavefunctions_.push_back(std::move(wf));
    }
    RngStream rng(reg.seed_);
    rng.restore(index.at("rng_state").get<std::string>());
    return {std::move(reg), std::move(rng)};
}

} // namespace ccqm
