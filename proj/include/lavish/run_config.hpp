// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat JSON run configuration shared by all subcommands.
//
// Required keys: d, heads, layers, patch, mode, m, rho, groups. Every other
// key has a default. Unknown keys are rejected. Errors are ConfigError and
// always name the offending key.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lavish/model.hpp"
#include "lavish/synthetic.hpp"

namespace lavish {

class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::invalid_argument(key + ": " + what), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;  // ablation and sweep; defaults to {seed}
    std::size_t train_count = 1024;
    std::size_t test_count = 256;
    double noise = 0.1;
    std::vector<std::size_t> m_values{1, 2, 4, 8};

    // Applies a seed override to seed, train.seed and a defaulted seeds list.
    void override_seed(std::uint64_t s);

    // Complete resolved form; parse(to_json()) reproduces the config.
    nlohmann::json to_json() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
// Throws ConfigError with key "config" when the file is unreadable or not JSON.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace lavish
