#include <doctest.h>

#include <sstream>

#include "ccqm/errors.hpp"
#include "ccqm/events.hpp"
#include "ccqm/snapshot.hpp"
#include "oracles.hpp"

using namespace ccqm;

TEST_CASE("event lines keep a fixed key order and round trip")
{
    CollapseEvent e;
    e.time = 1.25;
    e.model = EventModel::ccqm_jump;
    e.center = {0.5, -1.0};
    e.width_param = 3.5;
    e.v_before = 40;
    e.v_after = 20;
    e.seed = 77;
    e.wavefunctions = {2};
    const auto line = to_json_line(e);
    CHECK(line.find("\"time\"") < line.find("\"model\""));
    CHECK(line.find("\"model\"") < line.find("\"particle_index\""));
    CHECK(line.find("\"particle_index\":null") != std::string::npos);
    CHECK(line.find("\"v_after\"") < line.find("\"seed\""));
    CHECK(line.find('\n') == std::string::npos);
    CHECK(event_from_json_line(line) == e);

    e.model = EventModel::grw;
    e.particle_index = 3;
    std::stringstream ss;
    write_event_log(ss, {e, e});
    const auto back = read_event_log(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[1] == e);
}

TEST_CASE("malformed event lines are rejected")
{
    CHECK_THROWS_AS(event_from_json_line("{\"time\": 1}"), ConfigError);
    CHECK_THROWS_AS(event_from_json_line("not json"), ConfigError);
}

TEST_CASE("snapshot round trip is exact")
{
    auto lat = oracle::line_lattice(2, 8, 4.0, 1.0, 0.03, Statistics::boson);
    lat.particles[1].spatial_dim = 1;
    auto f = product_state(lat, {oracle::gaussian_1d(lat, 0.1, 0.5, 1.0), oracle::gaussian_1d(lat, -0.4, 0.7)});
    f.time = 0.375;
    std::stringstream ss;
    write_snapshot(ss, f);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "CCQM");
    CHECK(bytes.size() == 4 + 4 + 4 + 2 * 4 + 4 + 8 + 2 * 8 + 3 * 8 + 64 * 16);

    const auto g = read_snapshot(ss, lat.particles);
    CHECK(g.amplitudes == f.amplitudes);
    CHECK(g.time == f.time);
    CHECK(g.lattice.cell_lengths == f.lattice.cell_lengths);
    CHECK(g.lattice.base_magnitude == f.lattice.base_magnitude);
    CHECK(g.lattice.particles[0].statistics == Statistics::boson);

    std::stringstream again;
    write_snapshot(again, g);
    CHECK(again.str() == bytes);
}

TEST_CASE("snapshot with a bad magic is rejected")
{
    std::stringstream ss("XXXX0000");
    CHECK_THROWS_AS(read_snapshot(ss), Error);
}
