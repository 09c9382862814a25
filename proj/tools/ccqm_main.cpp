// Command-line front end: run, sweep, validate-config, replay, print-schema.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ccqm/config.hpp"
#include "ccqm/errors.hpp"
#include "ccqm/harness.hpp"

namespace {

enum Exit { ok = 0, config_error = 1, numeric_error = 2, check_failed = 3 };

struct Options {
    std::string config;
    std::string recipe;
    std::string out = "ccqm_out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trajectories;
    std::optional<std::size_t> threads;
};

ccqm::RunConfig resolve(const Options& o, const std::string& forced_recipe = {})
{
    ccqm::RunConfig c;
    if (!o.config.empty()) {
        c = ccqm::load_config(o.config);
        if (!o.recipe.empty()) c.recipe = o.recipe;
    } else {
        c = ccqm::recipe_defaults(o.recipe.empty() ? (forced_recipe.empty() ? "run" : forced_recipe) : o.recipe);
    }
    if (!forced_recipe.empty()) c.recipe = forced_recipe;
    if (o.seed) c.seed = *o.seed;
    if (o.trajectories) {
        if (*o.trajectories < 1) throw ccqm::ConfigError("--trajectories must be at least 1");
        c.trajectories = *o.trajectories;
    }
    if (o.threads) {
        if (*o.threads < 1) throw ccqm::ConfigError("--threads must be at least 1");
        c.threads = *o.threads;
    }
    return c;
}

int report(const ccqm::RunReport& r, const std::string& where)
{
    for (const auto& c : r.checks)
        std::cout << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  [" << c.detail << "]\n";
    std::cout << (r.passed() ? "all checks passed" : "property checks failed") << " (" << where << ")\n";
    return r.passed() ? ok : check_failed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Configuration-space collapse simulator"};
    app.require_subcommand(1);
    Options o;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", o.config, "run configuration (JSON)");
        cmd->add_option("--recipe", o.recipe, "built-in recipe")->check(CLI::IsMember(ccqm::recipe_names()));
        cmd->add_option("--out", o.out, "output directory");
        cmd->add_option("--seed", o.seed, "root seed");
        cmd->add_option("--trajectories", o.trajectories, "number of trajectories");
        cmd->add_option("--threads", o.threads, "worker threads");
    };
    auto* run = app.add_subcommand("run", "run a recipe and write its artifacts");
    add_run_flags(run);
    auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over v_critical, fraction and base_magnitude");
    add_run_flags(sweep);
    auto* validate = app.add_subcommand("validate-config", "check a configuration file");
    validate->add_option("--config", o.config, "run configuration (JSON)")->required();
    auto* replay = app.add_subcommand("replay", "re-derive property checks from a finished run");
    replay->add_option("--out", o.out, "run directory")->required();
    app.add_subcommand("print-schema", "print the configuration schema");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto c = resolve(o);
            return report(ccqm::run_experiment(c, o.out), o.out);
        }
        if (sweep->parsed()) {
            const auto c = resolve(o, "sweep");
            return report(ccqm::run_experiment(c, o.out), o.out);
        }
        if (validate->parsed()) {
            const auto c = ccqm::load_config(o.config);
            std::cout << "valid (recipe " << c.recipe << ", hash " << ccqm::config_hash(c) << ")\n";
            return ok;
        }
        if (replay->parsed()) return report(ccqm::replay(o.out), o.out);
        std::cout << ccqm::config_schema().dump(2) << '\n';
        return ok;
    } catch (const ccqm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const ccqm::Error& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return numeric_error;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return numeric_error;
    }
}
