#include "ccqm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ccqm/errors.hpp"
#include "ccqm/snapshot.hpp"
#include "ccqm/symmetry.hpp"
#include "logging.hpp"

namespace ccqm {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::string fmt(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt_short(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

void write_events(const fs::path& path, const std::vector<CollapseEvent>& events)
{
    std::ofstream out(path, std::ios::binary);
    write_event_log(out, events);
    if (!out) throw Error("failed writing " + path.string());
}

std::vector<CollapseEvent> read_events(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("missing event log " + path.string());
    return read_event_log(in);
}

ordered_json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("missing " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string traj_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "traj_%04zu", i);
    return buf;
}

std::string point_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "point_%04zu", i);
    return buf;
}

std::optional<GrwParams> grw_of(const RunConfig& c)
{
    if (c.model == Model::grw) return c.grw;
    return std::nullopt;
}

std::optional<CcqmParams> ccqm_of(const RunConfig& c)
{
    if (c.model == Model::ccqm) return c.ccqm;
    return std::nullopt;
}

/// Tick lengths covering [0, t_end]; the last one is shortened if needed.
std::vector<double> tick_lengths(double dt, double t_end)
{
    std::vector<double> out;
    if (t_end <= 0.0) return out;
    const auto n = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    for (std::size_t i = 0; i < n; ++i) out.push_back(dt);
    const double last = t_end - static_cast<double>(n - 1) * dt;
    if (n > 0 && std::abs(last - dt) > 1e-12 * dt) out.back() = last;
    return out;
}

void write_summary(const fs::path& out, const RunConfig& config, const RunReport& report)
{
    ordered_json s;
    s["recipe"] = config.recipe;
    s["config_hash"] = config_hash(config);
    s["passed"] = report.passed();
    auto& checks = s["checks"] = ordered_json::array();
    for (const auto& c : report.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    write_text(out / "summary.json", s.dump(2) + "\n");
}

void write_meta(const fs::path& out, const RunConfig& config)
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    ordered_json m;
    m["created"] = stamp;
    m["tool_version"] = kToolVersion;
    m["preset"] = config.preset;
    m["scale"] = config.preset == "paper-scale"
                     ? "physical GRW constants; hits are not expected within desk-scale horizons"
                     : "desk scale: constants scaled for laptop-size runs, not the physical values";
    m["threads"] = config.threads;
    write_text(out / "meta.json", m.dump(2) + "\n");
}

// Checks over artifacts ----------------------------------------------

Check make_check(std::string name, bool ok, std::string detail)
{
    return {std::move(name), ok, std::move(detail)};
}

Check norms_check(const std::vector<SeriesRow>& rows)
{
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(r.norm - 1.0));
    return make_check("norms within 1e-9", worst <= 1e-9, "max |norm - 1| = " + fmt_short(worst));
}

Check particle_check(const std::vector<SeriesRow>& rows, std::size_t n)
{
    std::map<double, std::set<std::size_t>> by_time;
    std::map<double, std::size_t> row_count;
    for (const auto& r : rows) {
        by_time[r.time].insert(r.particle);
        ++row_count[r.time];
    }
    bool ok = true;
    std::string detail = "every recorded time holds " + std::to_string(n) + " particles";
    for (const auto& [t, ps] : by_time)
        if (ps.size() != n || row_count[t] != n) {
            ok = false;
            detail = "t=" + fmt_short(t) + " holds " + std::to_string(row_count[t]) + " particle rows";
            break;
        }
    return make_check("particle count conserved", ok, detail);
}

std::vector<Check> ccqm_event_checks(const std::vector<CollapseEvent>& events, const CcqmParams& p)
{
    std::size_t jumps = 0, bad_contract = 0, bad_trigger = 0;
    for (const auto& e : events) {
        if (e.model != EventModel::ccqm_jump) continue;
        ++jumps;
        const long target = static_cast<long>(target_volume(e.v_before, p.fraction));
        if (std::abs(static_cast<long>(e.v_after) - target) > 1) ++bad_contract;
        if (e.v_before < p.v_critical) ++bad_trigger;
    }
    return {make_check("collapse volume contract |v_after - round(F v_before)| <= 1", bad_contract == 0,
                       std::to_string(bad_contract) + " of " + std::to_string(jumps) + " collapses violate it"),
            make_check("collapses fire only at or above v_critical", bad_trigger == 0,
                       std::to_string(bad_trigger) + " of " + std::to_string(jumps) + " collapses below threshold")};
}

Check dwell_check(const std::vector<SeriesRow>& rows, const RunConfig& c)
{
    // Longest stretch of recorded times a wavefunction spends at or above v_c.
    std::map<std::uint64_t, double> since;
    double worst = 0.0;
    for (const auto& r : rows) {
        if (r.relative_volume >= c.ccqm.v_critical) {
            auto [it, fresh] = since.emplace(r.wavefunction, r.time);
            worst = std::max(worst, r.time - it->second);
        } else {
            since.erase(r.wavefunction);
        }
    }
    const double allowed = c.ccqm.check_interval + c.dt * static_cast<double>(c.series_every);
    return make_check("no wavefunction stays above v_critical longer than check_interval", worst <= allowed + 1e-12,
                      "longest stretch " + fmt_short(worst) + ", allowed " + fmt_short(allowed));
}

Check wrap_check(const std::vector<SeriesRow>& rows)
{
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.boundary_weight);
    return make_check("norm near the domain edge stays <= 1e-6", worst <= 1e-6,
                      "max boundary weight " + fmt_short(worst));
}

Check event_time_check(const std::vector<CollapseEvent>& events, double t_end)
{
    double prev = 0.0;
    bool ok = true;
    for (const auto& e : events) {
        if (e.time < prev || e.time > t_end + 1e-9) ok = false;
        prev = e.time;
    }
    return make_check("event times ordered within [0, t_end]", ok, std::to_string(events.size()) + " events");
}

std::vector<Check> trajectory_checks(const RunConfig& c, const std::vector<CollapseEvent>& events,
                                     const std::vector<SeriesRow>& rows)
{
    std::vector<Check> out{norms_check(rows), particle_check(rows, c.particles.size()), wrap_check(rows),
                           event_time_check(events, c.t_end)};
    if (c.model == Model::ccqm) {
        for (auto& k : ccqm_event_checks(events, c.ccqm)) out.push_back(std::move(k));
        out.push_back(dwell_check(rows, c));
    }
    return out;
}

/// Collapses the per-trajectory check lists into one entry per check name.
std::vector<Check> merge_trajectory_checks(const std::vector<std::vector<Check>>& per_traj)
{
    if (per_traj.size() == 1) return per_traj.front();
    std::vector<Check> out;
    for (std::size_t i = 0; i < per_traj.front().size(); ++i) {
        Check c = per_traj.front()[i];
        std::size_t failed = 0;
        std::string first_fail;
        for (std::size_t t = 0; t < per_traj.size(); ++t)
            if (!per_traj[t][i].passed) {
                if (failed++ == 0) first_fail = traj_name(t) + ": " + per_traj[t][i].detail;
            }
        c.passed = failed == 0;
        c.detail = failed == 0 ? "all " + std::to_string(per_traj.size()) + " trajectories"
                               : std::to_string(failed) + " trajectories fail; " + first_fail;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<fs::path> trajectory_dirs(const RunConfig& c, const fs::path& out)
{
    std::vector<fs::path> dirs;
    if (c.trajectories == 1)
        dirs.push_back(out);
    else
        for (std::size_t i = 0; i < c.trajectories; ++i) dirs.push_back(out / traj_name(i));
    return dirs;
}

// Recipes --------------------------------------------------------------

void run_trajectories(const RunConfig& c, const RngStream& root, const fs::path& out)
{
    const auto dirs = trajectory_dirs(c, out);
    parallel_for(dirs.size(), c.threads, [&](std::size_t i) { simulate(c, root.derive(i), dirs[i]); });
}

std::vector<Check> checks_generic(const RunConfig& c, const fs::path& out)
{
    std::vector<std::vector<Check>> per;
    for (const auto& d : trajectory_dirs(c, out))
        per.push_back(trajectory_checks(c, read_events(d / "events.jsonl"), read_series(d / "series.csv")));
    return merge_trajectory_checks(per);
}

std::vector<Check> checks_free_spread(const RunConfig& c, const fs::path& out)
{
    auto checks = checks_generic(c, out);
    for (const auto& d : trajectory_dirs(c, out)) {
        const auto events = read_events(d / "events.jsonl");
        const auto rows = read_series(d / "series.csv");
        // Sawtooth: between consecutive collapses the volume climbs back to
        // v_c; the pre-collapse volume of each event is that maximum.
        std::size_t jumps = 0, low_peaks = 0;
        double prev_time = 0.0;
        for (const auto& e : events) {
            if (e.model != EventModel::ccqm_jump) continue;
            std::size_t peak = e.v_before;
            for (const auto& r : rows)
                if (r.time > prev_time && r.time < e.time) peak = std::max(peak, r.relative_volume);
            if (peak < c.ccqm.v_critical) ++low_peaks;
            prev_time = e.time;
            ++jumps;
        }
        checks.push_back(make_check("sawtooth: repeated collapses", jumps >= 2,
                                    (d == out ? std::string("run") : d.filename().string()) + ": " +
                                        std::to_string(jumps) + " collapses"));
        checks.push_back(make_check("inter-collapse volume maxima >= v_critical", low_peaks == 0,
                                    std::to_string(low_peaks) + " low maxima"));
        if (c.trajectories > 1) break;
    }
    return checks;
}

std::vector<Check> checks_grw_rates(const RunConfig& c, const fs::path& out)
{
    auto checks = checks_generic(c, out);
    std::vector<double> times;
    for (const auto& d : trajectory_dirs(c, out)) {
        std::vector<double> t;
        for (const auto& e : read_events(d / "events.jsonl"))
            if (e.model == EventModel::grw) t.push_back(e.time);
        std::sort(t.begin(), t.end());
        double prev = 0.0;
        for (double x : t) {
            times.push_back(x - prev);
            prev = x;
        }
    }
    const double expect = mean_wait_time(static_cast<double>(c.particles.size()), c.grw.lambda_rate);
    double mean = 0.0;
    for (double w : times) mean += w;
    const double n = static_cast<double>(times.size());
    mean = n > 0 ? mean / n : 0.0;
    const double se = n > 0 ? expect / std::sqrt(n) : 0.0;
    const bool ok = n > 0 && std::abs(mean - expect) <= 3.0 * se;
    checks.push_back(make_check("mean inter-hit time 1/(N lambda) within 3 standard errors", ok,
                                "mean " + fmt_short(mean) + " vs " + fmt_short(expect) + " (se " + fmt_short(se) +
                                    ", " + std::to_string(times.size()) + " waits)"));
    return checks;
}

void run_exp_growth(const RunConfig& c, const fs::path& out)
{
    if (c.wavefunctions.empty() || c.wavefunctions[0].packets.empty())
        throw ConfigError("config.wavefunctions: exp-growth needs one flat packet");
    const auto& packet = c.wavefunctions[0].packets[0];
    std::vector<SeriesRow> rows;
    for (std::size_t n = 1; n <= 3; ++n) {
        RunConfig cn = c;
        cn.particles.assign(n, c.particles[0]);
        cn.particles[0].statistics = Statistics::distinguishable;
        for (auto& p : cn.particles) p.statistics = Statistics::distinguishable;
        cn.cell_lengths.assign(n, c.cell_lengths[0]);
        WavefunctionSpec w;
        for (std::size_t k = 0; k < n; ++k) {
            w.particles.push_back(k);
            w.packets.push_back(packet);
        }
        const auto f = initial_field(cn, w);
        for (auto& r : field_rows(f, n - 1, w.particles)) rows.push_back(r);
    }
    write_series(out / "series.csv", rows);
    write_events(out / "events.jsonl", {});
}

std::vector<Check> checks_exp_growth(const RunConfig& c, const fs::path& out)
{
    const auto rows = read_series(out / "series.csv");
    std::map<std::uint64_t, std::size_t> v_of;
    for (const auto& r : rows) v_of[r.wavefunction] = r.relative_volume;
    const auto& packet = c.wavefunctions.at(0).packets.at(0);
    const int dim = c.particles.at(0).spatial_dim;
    std::size_t vs = 1;
    for (int d = 0; d < dim; ++d) vs *= packet.cells;
    std::vector<Check> checks;
    std::size_t expect = 1;
    for (std::uint64_t n = 1; n <= 3; ++n) {
        expect *= vs;
        const std::size_t got = v_of.count(n - 1) ? v_of[n - 1] : 0;
        checks.push_back(make_check("v = v_s^N for N = " + std::to_string(n), got == expect,
                                    "v = " + std::to_string(got) + ", v_s^N = " + std::to_string(expect)));
    }
    checks.push_back(norms_check(rows));
    return checks;
}

void run_symmetry_compare(const RunConfig& c, const fs::path& out)
{
    if (c.wavefunctions.empty()) throw ConfigError("config.wavefunctions: symmetry-compare needs a wavefunction");
    const auto input = initial_field(c, c.wavefunctions[0]);
    if (exchange_groups(input.lattice.particles).empty())
        throw ConfigError("config.particles: symmetry-compare needs identical bosons or fermions");

    // Same input, same seed for both models.
    RngStream grw_rng(c.seed);
    RngStream ccqm_rng(c.seed);
    const auto hit = grw_hit(input, 0, c.grw.alpha, grw_rng);
    CcqmParams p = c.ccqm;
    const std::size_t v = relative_volume(input);
    if (v < p.v_critical) throw ConfigError("config.ccqm.v_critical: input volume " + std::to_string(v) + " is below it");
    const auto jump = apply_ccqm_collapse(input, p, ccqm_rng);

    fs::create_directories(out / "snapshots");
    write_snapshot(out / "snapshots" / "input.ccqm", input);
    write_snapshot(out / "snapshots" / "after_grw.ccqm", hit.field);
    write_snapshot(out / "snapshots" / "after_ccqm.ccqm", jump.field);
    write_events(out / "events.jsonl", {hit.event, jump.event});
    std::vector<SeriesRow> rows;
    std::uint64_t id = 0;
    for (const auto* f : {&input, &hit.field, &jump.field})
        for (auto& r : field_rows(*f, id++, c.wavefunctions[0].particles)) rows.push_back(r);
    write_series(out / "series.csv", rows);
}

std::vector<Check> checks_symmetry_compare(const RunConfig& c, const fs::path& out)
{
    const auto specs = [&] {
        std::vector<ParticleSpec> s;
        for (auto k : c.wavefunctions.at(0).particles) s.push_back(c.particles.at(k));
        return s;
    }();
    const auto input = read_snapshot(out / "snapshots" / "input.ccqm", specs);
    const auto after_grw = read_snapshot(out / "snapshots" / "after_grw.ccqm", specs);
    const auto after_ccqm = read_snapshot(out / "snapshots" / "after_ccqm.ccqm", specs);
    const double r_in = exchange_residual(input);
    const double r_grw = exchange_residual(after_grw);
    const double r_ccqm = exchange_residual(after_ccqm);
    return {make_check("input is exchange (anti)symmetric", r_in <= 1e-10, "residual " + fmt_short(r_in)),
            make_check("GRW hit breaks exchange symmetry (residual > 1e-3)", r_grw > 1e-3, "residual " + fmt_short(r_grw)),
            make_check("CCQM collapse preserves exchange symmetry (residual <= 1e-10)", r_ccqm <= 1e-10,
                       "residual " + fmt_short(r_ccqm)),
            wrap_check(read_series(out / "series.csv"))};
}

double slit_window(const RunConfig& c)
{
    const auto& packet = c.wavefunctions.at(0).packets.at(0);
    const double hbar = c.hamiltonian.hbar();
    const double mass = c.particles.at(0).mass;
    if (!(packet.separation > 0.0)) throw ConfigError("config.wavefunctions[0].packets[0].separation must be positive");
    // One fringe period of the far-field pattern on each side of the center.
    return kTwoPi * hbar * c.t_end / (mass * packet.separation);
}

void run_double_slit(const RunConfig& c, const fs::path& out)
{
    if (c.sweep.v_critical.size() < 2) throw ConfigError("config.sweep.v_critical: double-slit needs at least two values");
    if (c.particles.size() != 1 || c.particles[0].spatial_dim != 1)
        throw ConfigError("config.particles: double-slit uses one 1D particle");
    const std::size_t points = c.sweep.v_critical.size();
    const std::size_t m = c.grid_points;
    std::vector<std::vector<double>> density(points, std::vector<double>(m, 0.0));
    const RngStream root(c.seed);
    for (std::size_t p = 0; p < points; ++p) {
        RunConfig cp = c;
        cp.ccqm.v_critical = c.sweep.v_critical[p];
        cp.model = Model::ccqm;
        std::vector<Trajectory> runs(c.trajectories);
        // Trajectory i draws from the same stream at every sweep point.
        parallel_for(c.trajectories, c.threads, [&](std::size_t i) { runs[i] = simulate(cp, root.derive(i), {}); });
        std::vector<CollapseEvent> events;
        std::ostringstream edges;
        edges << "trajectory,max_boundary_weight\n";
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& r = runs[i];
            double edge = 0.0;
            for (const auto& row : r.series) edge = std::max(edge, row.boundary_weight);
            edges << i << ',' << fmt(edge) << '\n';
            events.insert(events.end(), r.events.begin(), r.events.end());
            const auto g = marginal_density(r.final_fields.at(0), 0);
            for (std::size_t i = 0; i < m; ++i) density[p][i] += g[i] / static_cast<double>(c.trajectories);
        }
        const fs::path dir = out / point_name(p);
        fs::create_directories(dir);
        write_events(dir / "events.jsonl", events);
        write_text(dir / "boundary.csv", edges.str());
    }
    std::ostringstream csv;
    csv << "x";
    for (std::size_t p = 0; p < points; ++p) csv << ",v_critical_" << c.sweep.v_critical[p];
    csv << '\n';
    const double dx = c.domain_length / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        csv << fmt(-c.domain_length / 2.0 + static_cast<double>(i) * dx);
        for (std::size_t p = 0; p < points; ++p) csv << ',' << fmt(density[p][i]);
        csv << '\n';
    }
    write_text(out / "screen.csv", csv.str());
}

std::vector<Check> checks_double_slit(const RunConfig& c, const fs::path& out)
{
    std::ifstream in(out / "screen.csv");
    if (!in) throw ConfigError("missing screen.csv in " + out.string());
    std::string line;
    std::getline(in, line);
    const std::size_t points = c.sweep.v_critical.size();
    std::vector<double> x;
    std::vector<std::vector<double>> dens(points);
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        x.push_back(std::stod(cell));
        for (std::size_t p = 0; p < points; ++p) {
            std::getline(ss, cell, ',');
            dens[p].push_back(std::stod(cell));
        }
    }
    const double window = slit_window(c);
    std::vector<double> vis;
    std::string listing;
    for (std::size_t p = 0; p < points; ++p) {
        vis.push_back(fringe_visibility(x, dens[p], window));
        listing += (p ? ", " : "") + std::string("v_c=") + std::to_string(c.sweep.v_critical[p]) + ": " +
                   fmt_short(vis.back());
    }
    bool decreasing = true;
    for (std::size_t p = 1; p < points; ++p) decreasing = decreasing && vis[p] < vis[p - 1];
    std::size_t collapses_first = 0;
    for (const auto& e : read_events(out / point_name(0) / "events.jsonl"))
        collapses_first += e.model == EventModel::ccqm_jump;
    double worst_edge = 0.0;
    for (std::size_t p = 0; p < points; ++p) {
        std::ifstream edges(out / point_name(p) / "boundary.csv");
        if (!edges) throw ConfigError("missing boundary.csv in " + (out / point_name(p)).string());
        std::getline(edges, line);
        while (std::getline(edges, line))
            worst_edge = std::max(worst_edge, std::stod(line.substr(line.find(',') + 1)));
    }
    return {make_check("norm near the domain edge stays <= 1e-6", worst_edge <= 1e-6,
                       "max boundary weight over all trajectories " + fmt_short(worst_edge)),
            make_check("visibility >= 0.9 with v_critical above threshold", vis[0] >= 0.9,
                       listing + "; collapses at first point: " + std::to_string(collapses_first)),
            make_check("visibility strictly decreases as v_critical is lowered", decreasing, listing)};
}

void run_merge_then_collapse(const RunConfig& c, const fs::path& out)
{
    if (c.model != Model::ccqm) throw ConfigError("config.model: merge-then-collapse needs ccqm");
    if (c.wavefunctions.size() < 2) throw ConfigError("config.wavefunctions: merge-then-collapse needs two members");
    Registry reg = build_registry(c);
    RngStream rng(c.seed);
    std::vector<SeriesRow> rows = series_rows(reg);

    // Scripted phases: splitting held off until a merged member has
    // collapsed, then enabled so that a later check splits it.
    CcqmParams hold = c.ccqm;
    hold.split_base_probability = 0.0;
    const auto ticks = tick_lengths(c.dt, c.t_end);
    bool merged = false, collapsed = false;
    for (double dt : ticks) {
        tick(reg, dt, std::nullopt, collapsed ? c.ccqm : hold, rng);
        for (const auto& e : reg.events()) {
            merged = merged || e.model == EventModel::merge;
            collapsed = collapsed || (merged && e.model == EventModel::ccqm_jump);
        }
        for (auto& r : series_rows(reg)) rows.push_back(r);
    }
    write_events(out / "events.jsonl", reg.events());
    write_series(out / "series.csv", rows);
    if (c.write_snapshots) reg.write_checkpoint(out / "checkpoint", config_hash(c), rng);
}

std::vector<Check> checks_merge_then_collapse(const RunConfig& c, const fs::path& out)
{
    const auto events = read_events(out / "events.jsonl");
    const auto rows = read_series(out / "series.csv");
    auto first = [&](EventModel m, std::size_t from) {
        for (std::size_t i = from; i < events.size(); ++i)
            if (events[i].model == m) return i;
        return events.size();
    };
    const std::size_t i_merge = first(EventModel::merge, 0);
    const std::size_t i_jump = first(EventModel::ccqm_jump, i_merge);
    const std::size_t i_split = first(EventModel::split, i_jump);
    std::vector<Check> checks;
    checks.push_back(make_check("merge occurs", i_merge < events.size(), "event index " + std::to_string(i_merge)));
    checks.push_back(make_check("collapse follows the merge", i_jump < events.size(), "event index " + std::to_string(i_jump)));
    checks.push_back(make_check("split follows the collapse", i_split < events.size(), "event index " + std::to_string(i_split)));
    checks.push_back(particle_check(rows, c.particles.size()));
    checks.push_back(norms_check(rows));
    checks.push_back(wrap_check(rows));
    for (auto& k : ccqm_event_checks(events, c.ccqm)) checks.push_back(std::move(k));
    return checks;
}

std::vector<RunConfig> sweep_points(const RunConfig& c)
{
    auto or_default = [](auto list, auto fallback) {
        if (list.empty()) list.push_back(fallback);
        return list;
    };
    const auto vcs = or_default(c.sweep.v_critical, c.ccqm.v_critical);
    const auto fs_ = or_default(c.sweep.fraction, c.ccqm.fraction);
    const auto f0s = or_default(c.sweep.base_magnitude, c.base_magnitude);
    std::vector<RunConfig> out;
    for (auto vc : vcs)
        for (auto f : fs_)
            for (auto f0 : f0s) {
                RunConfig p = c;
                p.recipe = "run";
                p.sweep = {};
                p.ccqm.v_critical = vc;
                p.ccqm.fraction = f;
                p.base_magnitude = f0;
                p.threads = 1;
                out.push_back(std::move(p));
            }
    return out;
}

void write_config(const fs::path& out, const RunConfig& c)
{
    write_text(out / "config.json", c.to_json().dump(2) + "\n");
}

std::vector<Check> derive_checks(const RunConfig& c, const fs::path& out);

void run_sweep(const RunConfig& c, const fs::path& out)
{
    const auto points = sweep_points(c);
    const RngStream root(c.seed);
    parallel_for(points.size(), c.threads, [&](std::size_t i) {
        const fs::path dir = out / point_name(i);
        fs::create_directories(dir);
        write_config(dir, points[i]);
        // Each point owns the stream (seed, point index).
        const RngStream point_root = root.derive(i);
        run_trajectories(points[i], point_root, dir);
        RunReport r{derive_checks(points[i], dir)};
        write_summary(dir, points[i], r);
    });
    std::ostringstream csv;
    csv << "point,v_critical,fraction,base_magnitude,collapses,passed\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto dir = out / point_name(i);
        std::size_t collapses = 0;
        for (const auto& d : trajectory_dirs(points[i], dir))
            for (const auto& e : read_events(d / "events.jsonl")) collapses += e.model == EventModel::ccqm_jump;
        const auto s = read_json(dir / "summary.json");
        csv << i << ',' << points[i].ccqm.v_critical << ',' << fmt(points[i].ccqm.fraction) << ','
            << fmt(points[i].base_magnitude) << ',' << collapses << ',' << (s.at("passed").get<bool>() ? 1 : 0)
            << '\n';
    }
    write_text(out / "sweep.csv", csv.str());
}

std::vector<Check> checks_sweep(const RunConfig& c, const fs::path& out)
{
    const auto points = sweep_points(c);
    std::vector<Check> checks;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto sub = derive_checks(points[i], out / point_name(i));
        std::string failing;
        for (const auto& k : sub)
            if (!k.passed) failing += (failing.empty() ? "" : "; ") + k.name + " (" + k.detail + ")";
        checks.push_back(make_check(point_name(i) + " properties", failing.empty(),
                                    failing.empty() ? std::to_string(sub.size()) + " checks pass" : failing));
    }
    return checks;
}

std::vector<Check> derive_checks(const RunConfig& c, const fs::path& out)
{
    const auto& r = c.recipe;
    if (r == "free-spread-ccqm") return checks_free_spread(c, out);
    if (r == "exp-growth") return checks_exp_growth(c, out);
    if (r == "grw-rates") return checks_grw_rates(c, out);
    if (r == "symmetry-compare") return checks_symmetry_compare(c, out);
    if (r == "double-slit") return checks_double_slit(c, out);
    if (r == "merge-then-collapse") return checks_merge_then_collapse(c, out);
    if (r == "sweep") return checks_sweep(c, out);
    return checks_generic(c, out);
}

} // namespace

void write_series(const fs::path& path, const std::vector<SeriesRow>& rows)
{
    std::ostringstream s;
    s << kSeriesHeader << '\n';
    for (const auto& r : rows)
        s << fmt(r.time) << ',' << r.wavefunction << ',' << r.particle << ',' << r.relative_volume << ','
          << fmt(r.norm) << ',' << fmt(r.marginal_mean) << ',' << fmt(r.marginal_width) << ','
          << fmt(r.boundary_weight) << '\n';
    write_text(path, s.str());
}

std::vector<SeriesRow> read_series(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("missing series " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kSeriesHeader) throw ConfigError(path.string() + ": unexpected CSV header");
    std::vector<SeriesRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 8 columns");
        try {
            rows.push_back({std::stod(cells[0]), std::stoull(cells[1]), std::stoull(cells[2]), std::stoull(cells[3]),
                            std::stod(cells[4]), std::stod(cells[5]), std::stod(cells[6]), std::stod(cells[7])});
        } catch (const std::exception&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    return rows;
}

std::size_t boundary_margin(const LatticeSpec& lattice)
{
    return std::max<std::size_t>(1, lattice.grid_points / 16);
}

std::vector<SeriesRow> field_rows(const ConfigField& field, std::uint64_t id, const std::vector<std::size_t>& particles)
{
    std::vector<SeriesRow> rows;
    const auto& lat = field.lattice;
    const std::size_t v = relative_volume(field);
    const double norm = std::sqrt(norm_squared(field));
    const double edge = boundary_weight(field, boundary_margin(lat));
    for (std::size_t k = 0; k < particles.size(); ++k) {
        const auto g = marginal_density(field, k);
        const auto dim = static_cast<std::size_t>(lat.particles[k].spatial_dim);
        const GridIndexer sub(lat.grid_points, dim);
        const double dv = std::pow(lat.spacing(), static_cast<double>(dim));
        std::vector<double> m1(dim, 0.0), m2(dim, 0.0);
        std::vector<std::size_t> idx(dim);
        double mass = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            sub.decode(i, idx);
            mass += g[i] * dv;
            for (std::size_t d = 0; d < dim; ++d) {
                const double x = lat.coordinate(idx[d]);
                m1[d] += g[i] * x * dv;
                m2[d] += g[i] * x * x * dv;
            }
        }
        double var = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            m1[d] /= mass;
            var += m2[d] / mass - m1[d] * m1[d];
        }
        rows.push_back({field.time, id, particles[k], v, norm, m1[0], std::sqrt(std::max(0.0, var)), edge});
    }
    return rows;
}

std::vector<SeriesRow> series_rows(const Registry& registry)
{
    std::vector<SeriesRow> rows;
    for (const auto& wf : registry.wavefunctions())
        for (auto& r : field_rows(wf.field, wf.id, wf.particles)) rows.push_back(r);
    return rows;
}

Registry build_registry(const RunConfig& config)
{
    Registry reg(config.particles, config.hamiltonian, config.seed);
    reg.merge_coefficient = config.merge_coefficient;
    reg.limits.max_particles = config.max_particles;
    reg.limits.max_grid_points = config.max_grid_points;
    for (const auto& w : config.wavefunctions) reg.add(initial_field(config, w), w.particles);
    return reg;
}

Trajectory simulate(const RunConfig& config, RngStream rng, const fs::path& dir)
{
    Registry reg = build_registry(config);
    Trajectory t;
    t.series = series_rows(reg);
    const auto ticks = tick_lengths(config.dt, config.t_end);
    const auto grw = grw_of(config);
    const auto ccqm = ccqm_of(config);
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        tick(reg, ticks[i], grw, ccqm, rng);
        if ((i + 1) % config.series_every == 0 || i + 1 == ticks.size())
            for (auto& r : series_rows(reg)) t.series.push_back(r);
    }
    t.events = reg.events();
    for (const auto& wf : reg.wavefunctions()) t.final_fields.push_back(wf.field);
    if (!dir.empty()) {
        fs::create_directories(dir);
        write_events(dir / "events.jsonl", t.events);
        write_series(dir / "series.csv", t.series);
        if (config.write_snapshots) reg.write_checkpoint(dir / "checkpoint", config_hash(config), rng);
    }
    return t;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

bool RunReport::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

RunReport run_experiment(const RunConfig& config, const fs::path& out)
{
    fs::create_directories(out);
    write_config(out, config);
    const auto& r = config.recipe;
    if (r == "exp-growth")
        run_exp_growth(config, out);
    else if (r == "symmetry-compare")
        run_symmetry_compare(config, out);
    else if (r == "double-slit")
        run_double_slit(config, out);
    else if (r == "merge-then-collapse")
        run_merge_then_collapse(config, out);
    else if (r == "sweep")
        run_sweep(config, out);
    else
        run_trajectories(config, RngStream(config.seed), out);

    RunReport report{derive_checks(config, out)};
    write_summary(out, config, report);
    write_meta(out, config);
    return report;
}

RunReport replay(const fs::path& out)
{
    const auto config = load_config(out / "config.json");
    return RunReport{derive_checks(config, out)};
}

double fringe_visibility(const std::vector<double>& x, const std::vector<double>& density, double half_window)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) > half_window) continue;
        lo = std::min(lo, density[i]);
        hi = std::max(hi, density[i]);
    }
    if (!(hi > 0.0)) return 0.0;
    return (hi - lo) / (hi + lo);
}

} // namespace ccqm
