// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Subcommand bodies. Each writes its outputs into an existing or new output
// directory and overwrites previous files with identical bytes for identical
// inputs. ConfigError signals an invalid configuration; any other exception
// is a runtime failure.

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lavish/run_config.hpp"

namespace lavish {

using Logger = std::function<void(const std::string&)>;

struct TrainOutcome {
    TrainResult result;
    std::string frozen_sha_before;
    std::string frozen_sha_after;
};

// Builds the model for one seed, generates both splits from that seed and
// trains. The model is returned through `model_out` when non-null.
TrainOutcome train_point(const RunConfig& rc, const ModelConfig& mc, std::uint64_t seed,
                         std::unique_ptr<LavishModel>* model_out = nullptr);

struct AblationRow {
    std::string method;  // "avish" or "lavish"
    FusionMode mode = FusionMode::None;
    std::vector<double> per_seed;
    double accuracy = 0.0;  // mean over seeds
};

// {avish, lavish} x {none, a2v, v2a, bidirectional}, in that order.
std::vector<AblationRow> ablation_grid(const RunConfig& rc, const Logger& log = {});
// "method,a2v,v2a,accuracy"
std::string ablation_csv(const std::vector<AblationRow>& rows);
// "method,mode,seed,accuracy"
std::string ablation_runs_csv(const std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seeds);

struct SweepRow {
    std::size_t latents = 0;
    double accuracy = 0.0;
    std::uint64_t fusion_macs = 0;
};

// Compression plus fusion MACs of one forward pass, summed over all sites.
std::uint64_t model_fusion_macs(const ModelConfig& mc);

std::vector<SweepRow> latent_sweep(const RunConfig& rc, const std::vector<std::size_t>& m_values,
                                   const Logger& log = {});
// "m,accuracy,fusion_macs"
std::string latent_sweep_csv(const std::vector<SweepRow>& rows);

nlohmann::json cost_report(const RunConfig& rc);

void run_train(const RunConfig& rc, const std::filesystem::path& out, const Logger& log = {});
void run_ablation(const RunConfig& rc, const std::filesystem::path& out, const Logger& log = {});
void run_latent_sweep(const RunConfig& rc, const std::filesystem::path& out, const Logger& log = {});
void run_cost_report(const RunConfig& rc, const std::filesystem::path& out, const Logger& log = {});

// Writes bytes exactly; LF line endings are the caller's responsibility.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lavish
