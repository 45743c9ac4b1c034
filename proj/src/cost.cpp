// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/cost.hpp"

#include <sstream>
#include <stdexcept>

#include "lavish/rng.hpp"

namespace lavish {

using nlohmann::json;

std::uint64_t ParamReport::frozen_total() const {
    std::uint64_t t = 0;
    for (const auto& e : entries)
        if (e.frozen) t += e.count;
    return t;
}

std::uint64_t ParamReport::trainable_total() const {
    std::uint64_t t = 0;
    for (const auto& e : entries)
        if (!e.frozen) t += e.count;
    return t;
}

std::uint64_t ParamReport::sum_with_suffix(const std::string& suffix, bool trainable_only) const {
    std::uint64_t t = 0;
    for (const auto& e : entries) {
        if (trainable_only && e.frozen) continue;
        if (e.name.size() >= suffix.size() && e.name.compare(e.name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            t += e.count;
        }
    }
    return t;
}

ParamReport count_params(const LavishModel& model) {
    ParamReport r;
    r.label = "model";
    for (const auto& e : model.registry().entries()) {
        r.entries.push_back({e.name, shape_numel(e.tensor.shape()), e.frozen});
    }
    return r;
}

ParamReport analytic_params(const ModelConfig& cfg) {
    cfg.validate();
    const auto& b = cfg.backbone;
    const std::uint64_t d = b.width, hid = b.mlp_ratio * d, pv = 3 * b.patch * b.patch;
    ParamReport r;
    r.label = "analytic";
    auto add = [&r](std::string name, std::uint64_t count, bool frozen) { r.entries.push_back({std::move(name), count, frozen}); };
    add("backbone.patch_embed.weight", pv * d, true);
    add("backbone.patch_embed.bias", d, true);
    add("backbone.pos_embed", b.visual_tokens() * d, true);
    for (std::size_t l = 0; l < b.layers; ++l) {
        const std::string p = "backbone.layer" + std::to_string(l) + ".";
        for (const char* n : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) add(p + n, d * d, true);
        add(p + "mlp.w1", d * hid, true);
        add(p + "mlp.b1", hid, true);
        add(p + "mlp.w2", hid * d, true);
        add(p + "mlp.b2", d, true);
        for (const char* n : {"ln1.gamma", "ln1.beta", "ln2.gamma", "ln2.beta"}) add(p + n, d, true);
    }
    const SiteOptions& s = cfg.adapter.site;
    for (std::size_t l = 0; l < b.layers; ++l) {
        for (Direction dir : {Direction::A2V, Direction::V2A}) {
            if (!mode_enables(cfg.adapter.mode, dir)) continue;
            for (const char* att : {"_mha", "_mlp"}) {
                const std::string p = "adapter.layer" + std::to_string(l) + "." + std::string(direction_name(dir)) + att + ".";
                const std::uint64_t h = d / s.reduction;
                if (s.use_latents) {
                    add(p + "latents", s.latents * d, false);
                    add(p + "compression.gate", 1, false);
                }
                add(p + "fusion.gate", 1, false);
                add(p + "down.weight", d * h / s.groups, false);
                if (s.bias) add(p + "down.bias", h, false);
                add(p + "up.weight", h * d / s.groups, false);
                if (s.bias) add(p + "up.bias", d, false);
            }
        }
    }
    if (cfg.head) {
        add("head.weight", 2 * d * cfg.classes, false);
        add("head.bias", cfg.classes, false);
    }
    return r;
}

std::string_view fusion_variant_name(FusionVariant v) { return v == FusionVariant::Lavish ? "lavish" : "avish"; }

OpCounts MacReport::total() const {
    OpCounts t;
    for (const auto& [_, c] : ops) t += c;
    return t;
}

OpCounts MacReport::total_matching(const std::string& needle) const {
    OpCounts t;
    for (const auto& [label, c] : ops)
        if (label.find(needle) != std::string::npos) t += c;
    return t;
}

namespace {

void add_ops(MacReport& r, const std::string& label, std::uint64_t macs, std::uint64_t softmax = 0) {
    OpCounts& c = r.ops[label];
    c.macs += macs;
    c.exps += softmax;
    c.divs += softmax;
}

// Labels mirror the OpScope nesting of cma().
void cma_ops(MacReport& r, const std::string& prefix, std::uint64_t queries, std::uint64_t keys, std::uint64_t d) {
    add_ops(r, prefix + ".scores", queries * keys * d);
    add_ops(r, prefix, 0, queries * keys);
    add_ops(r, prefix + ".weighted", queries * keys * d);
}

void site_ops(MacReport& r, const std::string& prefix, std::uint64_t target, std::uint64_t source, std::uint64_t d,
              const SiteOptions& s, bool with_bottleneck) {
    if (s.use_latents) {
        cma_ops(r, prefix + ".compression", s.latents, source, d);
        cma_ops(r, prefix + ".fusion", target, s.latents, d);
    } else {
        cma_ops(r, prefix + ".fusion", target, source, d);
    }
    if (with_bottleneck) {
        const std::uint64_t h = d / s.reduction;
        add_ops(r, prefix + ".bottleneck", 2 * target * d * h / s.groups);
    }
}

}  // namespace

MacReport mac_fusion(std::uint64_t n, std::uint64_t k, std::uint64_t m, std::uint64_t d, FusionVariant variant) {
    if (n == 0 || k == 0 || d == 0) throw std::invalid_argument("mac_fusion: token counts and width must be positive");
    if (variant == FusionVariant::Lavish && m == 0) throw std::invalid_argument("mac_fusion: m must be at least 1");
    MacReport r;
    r.label = std::string(fusion_variant_name(variant));
    SiteOptions s;
    s.latents = m;
    s.use_latents = variant == FusionVariant::Lavish;
    site_ops(r, "site", n, k, d, s, false);
    return r;
}

MacReport instrumented_fusion(std::size_t n, std::size_t k, std::size_t m, std::size_t d, FusionVariant variant,
                              std::uint64_t seed) {
    const TokenSet target{Modality::Visual, random_normal({n, d}, 1.0, seed, "probe.target"), 0};
    const TokenSet source{Modality::Audio, random_normal({k, d}, 1.0, seed, "probe.source"), 0};
    const Tensor gate = Tensor::scalar(0.5);
    MacReport r;
    r.label = std::string(fusion_variant_name(variant));
    OpRecorder rec;
    {
        OpScope scope("site");
        if (variant == FusionVariant::Lavish) {
            const LatentTokens latents{Modality::Audio, 0, random_normal({m, d}, 1.0, seed, "probe.latents")};
            const Tensor summary = compress_to_latents(latents, source, CmaParams{gate});
            fuse_with_latents(target, summary, CmaParams{gate});
        } else {
            OpScope fusion("fusion");
            cma(target.tokens, source.tokens, source.tokens, gate);
        }
    }
    r.ops = rec.by_label();
    return r;
}

MacReport analytic_model_macs(const ModelConfig& cfg) {
    cfg.validate();
    const auto& b = cfg.backbone;
    const std::uint64_t d = b.width, hid = b.mlp_ratio * d, pv = 3 * b.patch * b.patch;
    const std::uint64_t n = b.visual_tokens(), k = b.audio_tokens();
    MacReport r;
    r.label = "analytic";
    add_ops(r, "visual.embed", n * pv * d);
    add_ops(r, "audio.embed", k * pv * d);
    for (std::size_t l = 0; l < b.layers; ++l) {
        const std::string p = "layer" + std::to_string(l);
        for (const auto& [stream, t] : {std::pair<std::string, std::uint64_t>{"visual", n}, {"audio", k}}) {
            add_ops(r, p + "." + stream + ".mha.qkv", 3 * t * d * d);
            add_ops(r, p + "." + stream + ".mha.attention", 2 * t * t * d, b.heads * t * t);
            add_ops(r, p + "." + stream + ".mha.out", t * d * d);
            add_ops(r, p + "." + stream + ".mlp", 2 * t * d * hid);
        }
        for (Direction dir : {Direction::A2V, Direction::V2A}) {
            if (!mode_enables(cfg.adapter.mode, dir)) continue;
            const std::uint64_t target = dir == Direction::A2V ? n : k;
            const std::uint64_t source = dir == Direction::A2V ? k : n;
            for (const char* att : {"_mha", "_mlp"}) {
                site_ops(r, p + ".adapter." + std::string(direction_name(dir)) + att, target, source, d, cfg.adapter.site, true);
            }
        }
    }
    if (cfg.head) add_ops(r, "head", 2 * d * cfg.classes);
    return r;
}

MacReport instrumented_model_macs(const LavishModel& model, std::uint64_t seed) {
    const auto& b = model.config().backbone;
    ImageInput img{b.image_height, b.image_width, {}};
    SpectrogramInput spec{b.spec_time, b.spec_freq, {}};
    Rng rng(seed, "probe.input");
    img.pixels.resize(img.height * img.width * 3);
    for (double& v : img.pixels) v = rng.uniform();
    spec.values.resize(spec.time_bins * spec.freq_bins);
    for (double& v : spec.values) v = rng.normal();
    MacReport r;
    r.label = "instrumented";
    OpRecorder rec;
    if (model.head()) {
        model.logits(img, spec);
    } else {
        model.encode(img, spec);
    }
    r.ops = rec.by_label();
    return r;
}

SchemeDescriptor SchemeDescriptor::from_json(const json& j) {
    SchemeDescriptor s;
    s.scheme = j.at("scheme").get<std::string>();
    s.width = j.at("d").get<std::size_t>();
    s.layers = j.value("layers", s.layers);
    s.sites_per_layer = j.value("sites_per_layer", s.sites_per_layer);
    s.reduction = j.value("rho", s.reduction);
    s.groups = j.value("groups", s.groups);
    s.latents = j.value("m", s.latents);
    s.use_latents = j.value("use_latents", s.use_latents);
    s.bias = j.value("bias", s.bias);
    s.rank = j.value("rank", s.rank);
    s.kronecker = j.value("kronecker", s.kronecker);
    return s;
}

std::vector<ParamReport> table5_report(const std::vector<SchemeDescriptor>& configs) {
    std::vector<ParamReport> out;
    for (const SchemeDescriptor& c : configs) {
        const std::uint64_t d = c.width;
        ParamReport r;
        r.label = c.scheme;
        auto add = [&r](std::string name, std::uint64_t count) {
            if (count > 0) r.entries.push_back({std::move(name), count, false});
        };
        const std::uint64_t sites = static_cast<std::uint64_t>(c.layers) * c.sites_per_layer;
        if (c.scheme == "lavish" || c.scheme == "adapter") {
            if (c.reduction == 0 || d % c.reduction != 0) throw std::invalid_argument("table5_report: rho must divide d");
            const std::uint64_t h = d / c.reduction;
            const std::uint64_t groups = c.scheme == "lavish" ? c.groups : 1;
            if (groups == 0 || d % groups != 0 || h % groups != 0) throw std::invalid_argument("table5_report: groups must divide d and d/rho");
            if (c.scheme == "lavish") {
                if (c.use_latents) add("latents", sites * c.latents * d);
                add("gates", sites * (c.use_latents ? 2 : 1));
            }
            add("down.weight", sites * d * h / groups);
            add("up.weight", sites * h * d / groups);
            if (c.bias) add("bias", sites * (h + d));
        } else if (c.scheme == "lora") {
            add("lora.a", static_cast<std::uint64_t>(c.layers) * 2 * d * c.rank);
            add("lora.b", static_cast<std::uint64_t>(c.layers) * 2 * c.rank * d);
        } else if (c.scheme == "compacter") {
            if (c.reduction == 0 || d % c.reduction != 0) throw std::invalid_argument("table5_report: rho must divide d");
            const std::uint64_t h = d / c.reduction;
            const std::uint64_t n = c.kronecker;
            if (n == 0 || d % n != 0 || h % n != 0) throw std::invalid_argument("table5_report: kronecker must divide d and d/rho");
            add("kronecker.shared", n * n * n);
            add("down.factors", sites * c.rank * (d + h));
            add("up.factors", sites * c.rank * (h + d));
            if (c.bias) add("bias", sites * (h + d));
        } else {
            throw std::invalid_argument("table5_report: unknown scheme '" + c.scheme + "'");
        }
        out.push_back(std::move(r));
    }
    return out;
}

json to_json(const ParamReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries) entries.push_back({{"name", e.name}, {"count", e.count}, {"frozen", e.frozen}});
    return {{"label", r.label},
            {"entries", entries},
            {"frozen", r.frozen_total()},
            {"trainable", r.trainable_total()},
            {"total", r.total()}};
}

json to_json(const MacReport& r) {
    json ops = json::object();
    for (const auto& [label, c] : r.ops) ops[label] = {{"macs", c.macs}, {"exps", c.exps}, {"divs", c.divs}};
    const OpCounts t = r.total();
    return {{"label", r.label}, {"ops", ops}, {"total", {{"macs", t.macs}, {"exps", t.exps}, {"divs", t.divs}}}};
}

ParamReport param_report_from_json(const json& j) {
    ParamReport r;
    r.label = j.at("label").get<std::string>();
    for (const auto& e : j.at("entries")) {
        r.entries.push_back({e.at("name").get<std::string>(), e.at("count").get<std::uint64_t>(), e.at("frozen").get<bool>()});
    }
    return r;
}

MacReport mac_report_from_json(const json& j) {
    MacReport r;
    r.label = j.at("label").get<std::string>();
    for (const auto& [label, c] : j.at("ops").items()) {
        r.ops[label] = OpCounts{c.at("macs").get<std::uint64_t>(), c.at("exps").get<std::uint64_t>(), c.at("divs").get<std::uint64_t>()};
    }
    return r;
}

std::string cost_csv(const ParamReport& params, const MacReport& macs) {
    std::ostringstream os;
    os << "name,frozen,trainable,macs\n";
    for (const auto& e : params.entries) {
        os << e.name << ',' << (e.frozen ? e.count : 0) << ',' << (e.frozen ? 0 : e.count) << ",0\n";
    }
    for (const auto& [label, c] : macs.ops) os << label << ",0,0," << c.macs << '\n';
    return os.str();
}

}  // namespace lavish
