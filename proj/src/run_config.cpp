// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/run_config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace lavish {

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "d",          "heads",       "layers",         "patch",       "mlp_ratio",   "image_height",
        "image_width", "spec_time",  "spec_freq",      "backbone_activation", "resize_audio_pos", "init_std",
        "mode",       "use_latents", "m",              "rho",         "groups",      "adapter_activation",
        "adapter_bias", "latent_std", "head",          "classes",     "lr_adapter",  "lr_head",
        "steps",      "batch_size",  "eval_every",     "beta1",       "beta2",       "eps",
        "seed",       "seeds",       "train_count",    "test_count",  "noise",       "m_values"};
    return keys;
}

const json* lookup(const json& j, const std::string& key, bool required) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required) throw ConfigError(key, "required field is missing");
        return nullptr;
    }
    return &*it;
}

std::uint64_t as_uint(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(key, "expected a non-negative integer");
}

void read_size(const json& j, const std::string& key, std::size_t& out, bool required = false, bool positive = true) {
    const json* v = lookup(j, key, required);
    if (!v) return;
    const std::uint64_t x = as_uint(*v, key);
    if (positive && x == 0) throw ConfigError(key, "must be positive");
    out = static_cast<std::size_t>(x);
}

void read_double(const json& j, const std::string& key, double& out) {
    const json* v = lookup(j, key, false);
    if (!v) return;
    if (!v->is_number()) throw ConfigError(key, "expected a number");
    out = v->get<double>();
    if (!std::isfinite(out)) throw ConfigError(key, "must be finite");
}

void read_bool(const json& j, const std::string& key, bool& out) {
    const json* v = lookup(j, key, false);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(key, "expected true or false");
    out = v->get<bool>();
}

std::string read_string(const json& j, const std::string& key, bool required, const std::string& fallback) {
    const json* v = lookup(j, key, required);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(key, "expected a string");
    return v->get<std::string>();
}

template <class F>
auto parse_enum(const std::string& key, const std::string& text, F parse) {
    try {
        return parse(text);
    } catch (const std::invalid_argument&) {
        throw ConfigError(key, "unrecognized value \"" + text + "\"");
    }
}

// Maps a validator message such as "rho must divide d" to its leading key.
[[noreturn]] void rethrow_validation(const std::invalid_argument& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    std::string msg = e.what();
    std::string key = msg.substr(0, msg.find_first_of(" :"));
    throw ConfigError(key.empty() ? "config" : key, msg);
}

}  // namespace

void RunConfig::override_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
    seeds = {s};
}

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known_keys().count(it.key())) throw ConfigError(it.key(), "unknown field");
    }

    RunConfig rc;
    BackboneConfig& b = rc.model.backbone;
    read_size(j, "d", b.width, true);
    read_size(j, "heads", b.heads, true);
    read_size(j, "layers", b.layers, true);
    read_size(j, "patch", b.patch, true);
    read_size(j, "mlp_ratio", b.mlp_ratio);
    read_size(j, "image_height", b.image_height);
    read_size(j, "image_width", b.image_width);
    read_size(j, "spec_time", b.spec_time);
    read_size(j, "spec_freq", b.spec_freq);
    b.activation = parse_enum("backbone_activation", read_string(j, "backbone_activation", false, "gelu"),
                              parse_activation);
    read_bool(j, "resize_audio_pos", b.resize_audio_pos);
    read_double(j, "init_std", b.init_std);
    if (!(b.init_std >= 0.0)) throw ConfigError("init_std", "must be non-negative");

    AdapterConfig& a = rc.model.adapter;
    a.mode = parse_enum("mode", read_string(j, "mode", true, ""), parse_fusion_mode);
    read_bool(j, "use_latents", a.site.use_latents);
    read_size(j, "m", a.site.latents, true);
    read_size(j, "rho", a.site.reduction, true);
    read_size(j, "groups", a.site.groups, true);
    a.site.activation = parse_enum("adapter_activation", read_string(j, "adapter_activation", false, "relu"),
                                   parse_activation);
    read_bool(j, "adapter_bias", a.site.bias);
    read_double(j, "latent_std", a.site.latent_std);
    if (!(a.site.latent_std >= 0.0)) throw ConfigError("latent_std", "must be non-negative");

    read_bool(j, "head", rc.model.head);
    read_size(j, "classes", rc.model.classes);

    TrainConfig& t = rc.train;
    read_double(j, "lr_adapter", t.lr_adapter);
    read_double(j, "lr_head", t.lr_head);
    read_size(j, "steps", t.steps, false, false);
    read_size(j, "batch_size", t.batch_size);
    read_size(j, "eval_every", t.eval_every, false, false);
    read_double(j, "beta1", t.beta1);
    read_double(j, "beta2", t.beta2);
    read_double(j, "eps", t.eps);

    if (const json* v = lookup(j, "seed", false)) rc.seed = as_uint(*v, "seed");
    if (const json* v = lookup(j, "seeds", false)) {
        if (!v->is_array() || v->empty()) throw ConfigError("seeds", "expected a non-empty array");
        for (const auto& s : *v) rc.seeds.push_back(as_uint(s, "seeds"));
    } else {
        rc.seeds = {rc.seed};
    }
    read_size(j, "train_count", rc.train_count);
    read_size(j, "test_count", rc.test_count);
    read_double(j, "noise", rc.noise);
    if (rc.train_count < 4) throw ConfigError("train_count", "must be at least 4");
    if (rc.test_count < 4) throw ConfigError("test_count", "must be at least 4");
    if (!(rc.noise >= 0.0 && rc.noise < 1.0)) throw ConfigError("noise", "must lie in [0, 1)");
    if (const json* v = lookup(j, "m_values", false)) {
        if (!v->is_array() || v->empty()) throw ConfigError("m_values", "expected a non-empty array");
        rc.m_values.clear();
        for (const auto& m : *v) {
            const std::uint64_t x = as_uint(m, "m_values");
            if (x == 0) throw ConfigError("m_values", "entries must be positive");
            rc.m_values.push_back(static_cast<std::size_t>(x));
        }
    }

    t.seed = rc.seed;
    t.mode = a.mode;
    t.latents = a.site.latents;
    try {
        rc.model.validate();
        t.validate();
    } catch (const std::invalid_argument& e) {
        rethrow_validation(e);
    }
    return rc;
}

nlohmann::json RunConfig::to_json() const {
    const BackboneConfig& b = model.backbone;
    const SiteOptions& s = model.adapter.site;
    json j;
    j["d"] = b.width;
    j["heads"] = b.heads;
    j["layers"] = b.layers;
    j["patch"] = b.patch;
    j["mlp_ratio"] = b.mlp_ratio;
    j["image_height"] = b.image_height;
    j["image_width"] = b.image_width;
    j["spec_time"] = b.spec_time;
    j["spec_freq"] = b.spec_freq;
    j["backbone_activation"] = std::string(activation_name(b.activation));
    j["resize_audio_pos"] = b.resize_audio_pos;
    j["init_std"] = b.init_std;
    j["mode"] = std::string(fusion_mode_name(model.adapter.mode));
    j["use_latents"] = s.use_latents;
    j["m"] = s.latents;
    j["rho"] = s.reduction;
    j["groups"] = s.groups;
    j["adapter_activation"] = std::string(activation_name(s.activation));
    j["adapter_bias"] = s.bias;
    j["latent_std"] = s.latent_std;
    j["head"] = model.head;
    j["classes"] = model.classes;
    j["lr_adapter"] = train.lr_adapter;
    j["lr_head"] = train.lr_head;
    j["steps"] = train.steps;
    j["batch_size"] = train.batch_size;
    j["eval_every"] = train.eval_every;
    j["beta1"] = train.beta1;
    j["beta2"] = train.beta2;
    j["eps"] = train.eps;
    j["seed"] = seed;
    j["seeds"] = seeds;
    j["train_count"] = train_count;
    j["test_count"] = test_count;
    j["noise"] = noise;
    j["m_values"] = m_values;
    return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

}  // namespace lavish
