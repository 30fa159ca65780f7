// SPDX-License-Identifier: Apache-2.0
// Command-line front end for the adaptation testbed.
#include "dpdlab/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>

namespace {

int load_config(const std::string& path, dpdlab::ExperimentConfig& cfg) {
    try {
        cfg = dpdlab::parse_config_file(path);
    } catch (const dpdlab::ConfigError& e) {
        if (e.field.empty())
            std::fprintf(stderr, "%s: line %d: %s\n", path.c_str(), e.line, e.what());
        else
            std::fprintf(stderr, "%s: line %d (%s): %s\n", path.c_str(), e.line,
                         e.field.c_str(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive predistortion simulation lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    unsigned jobs = 0;
    bool no_timestamp = false;

    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("config", config_path, "experiment config (INI)")->required();
    run->add_option("--output-dir", output_dir, "override [experiment] output_dir");
    auto* seed_opt = run->add_option("--seed", seed, "override [experiment] seed");
    auto* jobs_opt = run->add_option("--jobs", jobs, "override [experiment] jobs");
    run->add_flag("--no-timestamp", no_timestamp, "omit generation timestamps from CSV output");

    auto* validate = app.add_subcommand("validate", "check a config file without running it");
    validate->add_option("config", config_path, "experiment config (INI)")->required();

    CLI11_PARSE(app, argc, argv);

    dpdlab::ExperimentConfig cfg;
    if (int rc = load_config(config_path, cfg); rc != 0) return rc;

    if (validate->parsed()) {
        const auto diags = dpdlab::validate_config(cfg);
        if (diags.empty()) {
            std::printf("ok\n");
            return 0;
        }
        for (const auto& d : diags)
            std::fprintf(stderr, "%s: %s\n", d.field.c_str(), d.message.c_str());
        return 2;
    }

    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (jobs_opt->count() > 0) cfg.jobs = jobs;
    if (no_timestamp) cfg.timestamp = false;

    try {
        return dpdlab::run_experiment(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
