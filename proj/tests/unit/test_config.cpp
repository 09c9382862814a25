#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

#include "ccqm/config.hpp"
#include "ccqm/errors.hpp"
#include "ccqm/harness.hpp"
#include "ccqm/symmetry.hpp"

using namespace ccqm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("ccqm_unit_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string error_of(const json& doc)
{
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

json defaults_json(const std::string& recipe)
{
    return json::parse(recipe_defaults(recipe).to_json().dump());
}

/// Every key of `value` is declared by `schema`, recursively.
void covered(const json& value, const json& schema, const std::string& path)
{
    if (value.is_object()) {
        REQUIRE_MESSAGE(schema.contains("properties"), path);
        for (const auto& item : value.items()) {
            CHECK_MESSAGE(schema["properties"].contains(item.key()), (path + "." + item.key()));
            if (schema["properties"].contains(item.key()))
                covered(item.value(), schema["properties"][item.key()], path + "." + item.key());
        }
    } else if (value.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < value.size(); ++i) covered(value[i], schema["items"], path + "[]");
    }
}

} // namespace

TEST_CASE("every recipe default parses and round trips through its canonical form")
{
    for (const auto& name : recipe_names()) {
        const auto c = recipe_defaults(name);
        CHECK(c.recipe == name);
        const auto again = parse_config_text(c.to_json().dump());
        CHECK(again.to_json() == c.to_json());
        CHECK(config_hash(again) == config_hash(c));
    }
}

TEST_CASE("schema declares every key the defaults use")
{
    const auto schema = json::parse(config_schema().dump());
    for (const auto& name : recipe_names()) covered(defaults_json(name), schema, name);
}

TEST_CASE("unknown keys are rejected with their path")
{
    auto doc = defaults_json("run");
    doc["lattice"]["grid_point"] = 64;
    CHECK(error_of(doc).find("config.lattice.grid_point: unknown key") != std::string::npos);

    doc = defaults_json("run");
    doc["particles"][0]["charge"] = 1;
    CHECK(error_of(doc).find("config.particles[0].charge") != std::string::npos);
}

TEST_CASE("malformed values name the offending field")
{
    auto doc = defaults_json("run");
    doc["format_version"] = 99;
    CHECK(error_of(doc).find("format_version") != std::string::npos);

    doc = defaults_json("run");
    doc["time"]["dt"] = -1.0;
    CHECK(error_of(doc).find("config.time.dt") != std::string::npos);

    doc = defaults_json("run");
    doc["model"] = "copenhagen";
    CHECK(error_of(doc).find("config.model") != std::string::npos);

    CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
}

TEST_CASE("thread count does not enter the configuration hash")
{
    auto a = recipe_defaults("grw-rates");
    auto b = a;
    b.threads = 7;
    CHECK(config_hash(a) == config_hash(b));
    b.seed += 1;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("fermion initial fields are antisymmetric and normalized")
{
    const auto c = recipe_defaults("symmetry-compare");
    const auto f = initial_field(c, c.wavefunctions.at(0));
    CHECK(exchange_residual(f) < 1e-12);
    CHECK(std::abs(norm_squared(f) - 1.0) < 1e-12);
}

TEST_CASE("replay reproduces the checks of a run")
{
    for (const std::string name : {"exp-growth", "grw-rates", "merge-then-collapse"}) {
        const auto out = scratch("replay_" + name);
        const auto ran = run_experiment(recipe_defaults(name), out);
        const auto again = replay(out);
        REQUIRE(ran.checks.size() == again.checks.size());
        for (std::size_t i = 0; i < ran.checks.size(); ++i) {
            CHECK(ran.checks[i].name == again.checks[i].name);
            CHECK(ran.checks[i].passed == again.checks[i].passed);
            CHECK(ran.checks[i].detail == again.checks[i].detail);
        }
        CHECK(ran.passed());
    }
}

TEST_CASE("reruns write identical artifacts")
{
    auto c = recipe_defaults("free-spread-ccqm");
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    run_experiment(c, a);
    run_experiment(c, b);
    for (const char* file : {"events.jsonl", "series.csv", "summary.json", "config.json"})
        CHECK_MESSAGE(slurp(a / file) == slurp(b / file), file);
    CHECK(!slurp(a / "events.jsonl").empty());
}

TEST_CASE("replay of a directory without a run is a configuration error")
{
    CHECK_THROWS_AS(replay(scratch("empty")), ConfigError);
}
