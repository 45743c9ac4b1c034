// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/commands.hpp"

#include <fstream>
#include <memory>
#include <stdexcept>

#include "lavish/cost.hpp"
#include "lavish/tensor_io.hpp"

namespace lavish {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void note(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

void echo_config(const RunConfig& rc, const fs::path& out) {
    write_text(out / "config.resolved.json", rc.to_json().dump(2) + "\n");
}

constexpr FusionMode kModes[] = {FusionMode::None, FusionMode::A2V, FusionMode::V2A, FusionMode::Bidirectional};

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

TrainOutcome train_point(const RunConfig& rc, const ModelConfig& mc, std::uint64_t seed,
                         std::unique_ptr<LavishModel>* model_out) {
    auto model = std::make_unique<LavishModel>(mc, seed);
    const DatasetShape shape = DatasetShape::from(mc.backbone);
    const auto train_set = generate_dataset(seed, rc.train_count, rc.noise, shape, "train");
    const auto test_set = generate_dataset(seed, rc.test_count, rc.noise, shape, "test");
    TrainConfig tc = rc.train;
    tc.seed = seed;
    tc.mode = mc.adapter.mode;
    tc.latents = mc.adapter.site.latents;

    TrainOutcome o;
    o.frozen_sha_before = frozen_fingerprint(model->registry());
    o.result = train(*model, train_set, test_set, tc);
    o.frozen_sha_after = frozen_fingerprint(model->registry());
    if (o.frozen_sha_before != o.frozen_sha_after) throw std::logic_error("frozen weights changed during training");
    if (model_out) *model_out = std::move(model);
    return o;
}

std::vector<AblationRow> ablation_grid(const RunConfig& rc, const Logger& log) {
    std::vector<AblationRow> rows;
    for (const bool latents : {false, true}) {
        for (const FusionMode mode : kModes) {
            AblationRow row;
            row.method = latents ? "lavish" : "avish";
            row.mode = mode;
            ModelConfig mc = rc.model;
            mc.adapter.mode = mode;
            mc.adapter.site.use_latents = latents;
            for (const std::uint64_t seed : rc.seeds) {
                const double acc = train_point(rc, mc, seed).result.final_accuracy();
                row.per_seed.push_back(acc);
                note(log, row.method + " " + std::string(fusion_mode_name(mode)) + " seed " + std::to_string(seed) +
                              ": accuracy " + format_double(acc));
            }
            row.accuracy = mean(row.per_seed);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "method,a2v,v2a,accuracy\n";
    for (const auto& r : rows) {
        out += r.method + ',' + (mode_enables(r.mode, Direction::A2V) ? "1" : "0") + ',' +
               (mode_enables(r.mode, Direction::V2A) ? "1" : "0") + ',' + format_double(r.accuracy) + '\n';
    }
    return out;
}

std::string ablation_runs_csv(const std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seeds) {
    std::string out = "method,mode,seed,accuracy\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
            out += r.method + ',' + std::string(fusion_mode_name(r.mode)) + ',' + std::to_string(seeds.at(i)) + ',' +
                   format_double(r.per_seed[i]) + '\n';
        }
    }
    return out;
}

std::uint64_t model_fusion_macs(const ModelConfig& mc) {
    const MacReport r = analytic_model_macs(mc);
    return r.total_matching(".compression").macs + r.total_matching(".fusion").macs;
}

std::vector<SweepRow> latent_sweep(const RunConfig& rc, const std::vector<std::size_t>& m_values, const Logger& log) {
    if (m_values.empty()) throw ConfigError("m_values", "expected at least one value");
    std::vector<SweepRow> rows;
    for (const std::size_t m : m_values) {
        if (m == 0) throw ConfigError("m_values", "entries must be positive");
        ModelConfig mc = rc.model;
        mc.adapter.site.latents = m;
        mc.adapter.site.use_latents = true;
        std::vector<double> acc;
        for (const std::uint64_t seed : rc.seeds) acc.push_back(train_point(rc, mc, seed).result.final_accuracy());
        rows.push_back({m, mean(acc), model_fusion_macs(mc)});
        note(log, "m=" + std::to_string(m) + ": accuracy " + format_double(rows.back().accuracy));
    }
    return rows;
}

std::string latent_sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "m,accuracy,fusion_macs\n";
    for (const auto& r : rows) {
        out += std::to_string(r.latents) + ',' + format_double(r.accuracy) + ',' + std::to_string(r.fusion_macs) + '\n';
    }
    return out;
}

json cost_report(const RunConfig& rc) {
    json report;
    report["config"] = rc.to_json();
    std::uint64_t fusion[2] = {0, 0};
    for (const bool latents : {true, false}) {
        ModelConfig mc = rc.model;
        mc.adapter.site.use_latents = latents;
        const LavishModel model(mc, rc.seed);
        const ParamReport params = count_params(model);
        const MacReport analytic = analytic_model_macs(mc);
        const MacReport measured = instrumented_model_macs(model, rc.seed);
        if (analytic.ops != measured.ops) {
            throw std::logic_error("analytic and instrumented operation counts disagree");
        }
        const std::uint64_t f = model_fusion_macs(mc);
        fusion[latents ? 0 : 1] = f;
        json v;
        v["params"] = to_json(params);
        v["macs"] = to_json(analytic);
        v["fusion_macs"] = f;
        v["trainable_params"] = params.trainable_total();
        v["frozen_params"] = params.frozen_total();
        report["variants"][latents ? "lavish" : "avish"] = v;
    }
    report["fusion_mac_ratio_avish_over_lavish"] =
        fusion[0] ? json(static_cast<double>(fusion[1]) / static_cast<double>(fusion[0])) : json(nullptr);

    // Projection weights of the configured grouping against a dense (G=1) build.
    ModelConfig dense = rc.model;
    dense.adapter.site.groups = 1;
    const ParamReport grouped_p = count_params(LavishModel(rc.model, rc.seed));
    const ParamReport dense_p = count_params(LavishModel(dense, rc.seed));
    auto proj = [](const ParamReport& p) { return p.sum_with_suffix(".down.weight") + p.sum_with_suffix(".up.weight"); };
    const std::uint64_t g = proj(grouped_p), d = proj(dense_p);
    report["grouped_adapter"] = {{"groups", rc.model.adapter.site.groups},
                                 {"grouped_projection_params", g},
                                 {"dense_projection_params", d},
                                 {"ratio", d ? json(static_cast<double>(g) / static_cast<double>(d)) : json(nullptr)}};
    return report;
}

void run_train(const RunConfig& rc, const fs::path& out, const Logger& log) {
    fs::create_directories(out);
    echo_config(rc, out);
    std::unique_ptr<LavishModel> model;
    const TrainOutcome o = train_point(rc, rc.model, rc.seed, &model);
    write_text(out / "metrics.csv", metrics_csv(o.result.history));
    TensorFile weights = registry_to_file(model->registry());
    weights.meta["frozen_sha256"] = o.frozen_sha_after;
    weights.meta["seed"] = rc.seed;
    save_tensor_file(out / "weights", weights);
    note(log, "final test accuracy " + format_double(o.result.final_accuracy()));
}

void run_ablation(const RunConfig& rc, const fs::path& out, const Logger& log) {
    fs::create_directories(out);
    echo_config(rc, out);
    const auto rows = ablation_grid(rc, log);
    write_text(out / "ablation.csv", ablation_csv(rows));
    write_text(out / "ablation_runs.csv", ablation_runs_csv(rows, rc.seeds));
}

void run_latent_sweep(const RunConfig& rc, const fs::path& out, const Logger& log) {
    fs::create_directories(out);
    echo_config(rc, out);
    write_text(out / "latent_sweep.csv", latent_sweep_csv(latent_sweep(rc, rc.m_values, log)));
}

void run_cost_report(const RunConfig& rc, const fs::path& out, const Logger& log) {
    fs::create_directories(out);
    echo_config(rc, out);
    const json report = cost_report(rc);
    write_text(out / "cost_report.json", report.dump(2) + "\n");
    for (const char* variant : {"lavish", "avish"}) {
        const json& v = report["variants"][variant];
        write_text(out / (std::string("cost_") + variant + ".csv"),
                   cost_csv(param_report_from_json(v["params"]), mac_report_from_json(v["macs"])));
    }
    note(log, "trainable parameters (lavish) " + std::to_string(report["variants"]["lavish"]["trainable_params"].get<std::uint64_t>()));
}

}  // namespace lavish
