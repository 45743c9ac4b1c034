// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parameter and multiply-accumulate accounting.
//
// Unit conventions: one MAC is one multiply plus one add (2 FLOPs). Only
// contractions (matrix products, grouped projections) contribute MACs.
// Softmax exponentials and divisions are reported separately. Bias adds,
// activations, norms, gates and residual adds are not counted.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lavish/model.hpp"
#include "lavish/op_counter.hpp"

namespace lavish {

struct ParamEntry {
    std::string name;
    std::uint64_t count = 0;
    bool frozen = true;

    friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

struct ParamReport {
    std::string label;
    std::vector<ParamEntry> entries;

    std::uint64_t frozen_total() const;
    std::uint64_t trainable_total() const;
    std::uint64_t total() const { return frozen_total() + trainable_total(); }
    // Sum of entries whose name ends with the suffix.
    std::uint64_t sum_with_suffix(const std::string& suffix, bool trainable_only = true) const;
};

// Enumerates the model's freeze registry.
ParamReport count_params(const LavishModel& model);
// Closed-form counts for the same names, computed from the config alone.
ParamReport analytic_params(const ModelConfig& cfg);

enum class FusionVariant { Lavish, Avish };
std::string_view fusion_variant_name(FusionVariant v);

struct MacReport {
    std::string label;
    std::map<std::string, OpCounts> ops;

    OpCounts total() const;
    OpCounts total_matching(const std::string& needle) const;
};

// Cross-modal attention cost of one direction with n target tokens and k
// source tokens. LAVisH: compression 2*m*k*d plus fusion 2*n*m*d.
// AVisH: 2*n*k*d. Softmax exps/divs: m*k + n*m versus n*k.
MacReport mac_fusion(std::uint64_t n, std::uint64_t k, std::uint64_t m, std::uint64_t d, FusionVariant variant);

// Runs the same direction on random tokens under an OpRecorder and reports
// the labels the execution produced (bottleneck excluded).
MacReport instrumented_fusion(std::size_t n, std::size_t k, std::size_t m, std::size_t d, FusionVariant variant,
                              std::uint64_t seed = 0);

// Closed-form per-label counts for one forward pass of the model.
MacReport analytic_model_macs(const ModelConfig& cfg);
// Forward pass of a model on a random input under an OpRecorder.
MacReport instrumented_model_macs(const LavishModel& model, std::uint64_t seed = 0);

// Trainable-parameter formulas for parameter-efficient schemes.
//   lavish:    per site m*d latents (if used) + gates + 2*d*(d/rho)/G projections
//              (+ d/rho + d biases)
//   adapter:   per site 2*d*(d/rho) + (d/rho + d biases)
//   lora:      per layer 2 targets (W_q, W_v) x rank r x (d + d)
//   compacter: per site, each projection in->out is sum_i A_i (x) (s_i t_i^T)
//              with low-rank s_i, t_i: r*(in + out) per projection, plus the
//              n^3 shared A_i once, plus biases
struct SchemeDescriptor {
    std::string scheme;
    std::size_t width = 0;
    std::size_t layers = 1;
    std::size_t sites_per_layer = 4;
    std::size_t reduction = 8;
    std::size_t groups = 1;
    std::size_t latents = 2;
    bool use_latents = true;
    bool bias = false;
    std::size_t rank = 0;
    std::size_t kronecker = 4;

    static SchemeDescriptor from_json(const nlohmann::json& j);
};

std::vector<ParamReport> table5_report(const std::vector<SchemeDescriptor>& configs);

nlohmann::json to_json(const ParamReport& r);
nlohmann::json to_json(const MacReport& r);
ParamReport param_report_from_json(const nlohmann::json& j);
MacReport mac_report_from_json(const nlohmann::json& j);

// CSV with header "name,frozen,trainable,macs"; parameter rows first, then
// operation rows.
std::string cost_csv(const ParamReport& params, const MacReport& macs);

}  // namespace lavish
