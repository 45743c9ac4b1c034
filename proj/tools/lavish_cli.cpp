// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// lavish <train|ablation|latent-sweep|cost-report> --config PATH [--out DIR]
//        [--seed N] [--quiet] [--m-values 1,2,4]
//
// Exit status: 0 success, 2 invalid configuration or usage, 3 runtime failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lavish/commands.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
    std::string config;
    std::string out = "./runs";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    std::vector<std::size_t> m_values;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "JSON run configuration")->required();
    cmd->add_option("--out", o.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", o.seed, "overrides seed and seeds in the config");
    cmd->add_flag("--quiet", o.quiet, "suppress progress messages");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent audio-visual adapter experiments"};
    app.require_subcommand(1);
    Options o;
    CLI::App* train = app.add_subcommand("train", "train one model and write metrics and weights");
    CLI::App* ablation = app.add_subcommand("ablation", "fusion-direction grid for both adapter variants");
    CLI::App* sweep = app.add_subcommand("latent-sweep", "accuracy and fusion cost per latent count");
    CLI::App* cost = app.add_subcommand("cost-report", "parameter and MAC report");
    for (CLI::App* c : {train, ablation, sweep, cost}) add_common(c, o);
    sweep->add_option("--m-values", o.m_values, "latent counts, overriding m_values")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    lavish::RunConfig rc;
    try {
        rc = lavish::load_run_config(o.config);
        if (o.seed) rc.override_seed(*o.seed);
        if (!o.m_values.empty()) {
            for (std::size_t m : o.m_values) {
                if (m == 0) throw lavish::ConfigError("m_values", "entries must be positive");
            }
            rc.m_values = o.m_values;
        }
    } catch (const std::exception& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return kExitConfig;
    }

    const lavish::Logger log = [&](const std::string& msg) {
        if (!o.quiet) std::cerr << msg << '\n';
    };
    try {
        if (train->parsed()) lavish::run_train(rc, o.out, log);
        if (ablation->parsed()) lavish::run_ablation(rc, o.out, log);
        if (sweep->parsed()) lavish::run_latent_sweep(rc, o.out, log);
        if (cost->parsed()) lavish::run_cost_report(rc, o.out, log);
    } catch (const lavish::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
