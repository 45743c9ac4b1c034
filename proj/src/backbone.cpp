// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "lavish/op_counter.hpp"
#include "lavish/rng.hpp"

namespace lavish {

std::string_view modality_name(Modality m) { return m == Modality::Audio ? "audio" : "visual"; }

Tensor activate(const Tensor& x, Activation act) { return act == Activation::Gelu ? gelu(x) : relu(x); }

std::string_view activation_name(Activation act) { return act == Activation::Gelu ? "gelu" : "relu"; }

Activation parse_activation(const std::string& name) {
    if (name == "gelu") return Activation::Gelu;
    if (name == "relu") return Activation::Relu;
    throw std::invalid_argument("activation: unknown activation '" + name + "'");
}

Tensor random_normal(const Shape& shape, double stddev, std::uint64_t seed, const std::string& name, bool requires_grad) {
    Rng rng(seed, name);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.normal(0.0, stddev);
    return Tensor::from(shape, std::move(v), requires_grad);
}

Tensor unfold_patches(const ImageInput& img, std::size_t patch) {
    if (patch == 0) throw std::invalid_argument("unfold_patches: patch size must be positive");
    if (img.height == 0 || img.width == 0 || img.height % patch != 0 || img.width % patch != 0) {
        throw std::invalid_argument("patch_embed: image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                    " is not divisible by patch " + std::to_string(patch));
    }
    if (img.pixels.size() != img.height * img.width * 3) throw std::invalid_argument("patch_embed: pixel buffer size mismatch");
    const std::size_t gh = img.height / patch, gw = img.width / patch;
    const std::size_t pv = 3 * patch * patch;
    std::vector<double> out(gh * gw * pv);
    for (std::size_t py = 0; py < gh; ++py) {
        for (std::size_t px = 0; px < gw; ++px) {
            double* row = out.data() + (py * gw + px) * pv;
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < patch; ++y)
                    for (std::size_t x = 0; x < patch; ++x)
                        row[(c * patch + y) * patch + x] = img.at(py * patch + y, px * patch + x, c);
        }
    }
    return Tensor::from({gh * gw, pv}, std::move(out));
}

Tensor resize_positional(const PositionalTable& pos, std::size_t grid_h, std::size_t grid_w) {
    if (pos.grid_h == grid_h && pos.grid_w == grid_w) return pos.table;
    const std::size_t d = pos.table.cols();
    std::vector<double> out(grid_h * grid_w * d, 0.0);
    const auto src = pos.table.data();
    auto source_coord = [](std::size_t dst, std::size_t dst_len, std::size_t src_len) {
        const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(src_len) / static_cast<double>(dst_len) - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    };
    for (std::size_t y = 0; y < grid_h; ++y) {
        const double sy = source_coord(y, grid_h, pos.grid_h);
        const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t y1 = std::min(y0 + 1, pos.grid_h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < grid_w; ++x) {
            const double sx = source_coord(x, grid_w, pos.grid_w);
            const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
            const std::size_t x1 = std::min(x0 + 1, pos.grid_w - 1);
            const double fx = sx - static_cast<double>(x0);
            double* o = out.data() + (y * grid_w + x) * d;
            for (std::size_t k = 0; k < d; ++k) {
                const double v00 = src[(y0 * pos.grid_w + x0) * d + k];
                const double v01 = src[(y0 * pos.grid_w + x1) * d + k];
                const double v10 = src[(y1 * pos.grid_w + x0) * d + k];
                const double v11 = src[(y1 * pos.grid_w + x1) * d + k];
                o[k] = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
            }
        }
    }
    return Tensor::from({grid_h * grid_w, d}, std::move(out));
}

namespace {

Tensor project_patches(const Tensor& patches, const PatchProjection& proj) {
    if (patches.cols() != proj.weight.rows()) {
        throw std::invalid_argument("patch_embed: projection expects patch " + std::to_string(proj.patch) +
                                    " but weight has shape " + shape_to_string(proj.weight.shape()));
    }
    OpScope scope("embed");
    return add_row_bias(matmul(patches, proj.weight), proj.bias);
}

}  // namespace

TokenSet patch_embed(const ImageInput& img, const PatchProjection& proj, const PositionalTable* pos) {
    Tensor tokens = project_patches(unfold_patches(img, proj.patch), proj);
    if (pos != nullptr) {
        const std::size_t gh = img.height / proj.patch, gw = img.width / proj.patch;
        if (pos->grid_h != gh || pos->grid_w != gw) {
            throw std::invalid_argument("patch_embed: positional grid " + std::to_string(pos->grid_h) + "x" +
                                        std::to_string(pos->grid_w) + " does not match image grid " +
                                        std::to_string(gh) + "x" + std::to_string(gw));
        }
        tokens = add(tokens, pos->table);
    }
    return TokenSet{Modality::Visual, tokens, 0};
}

TokenSet spectrogram_embed(const SpectrogramInput& spec, const PatchProjection& proj, const PositionalTable* pos, bool resize_pos) {
    if (spec.values.size() != spec.time_bins * spec.freq_bins || spec.values.empty()) {
        throw std::invalid_argument("spectrogram_embed: value buffer size mismatch");
    }
    for (double v : spec.values) {
        if (!std::isfinite(v)) throw std::domain_error("spectrogram_embed: non-finite spectrogram value");
    }
    const std::size_t p = proj.patch;
    const std::size_t gh = (spec.time_bins + p - 1) / p, gw = (spec.freq_bins + p - 1) / p;
    ImageInput inflated;
    inflated.height = gh * p;
    inflated.width = gw * p;
    inflated.pixels.assign(inflated.height * inflated.width * 3, 0.0);
    for (std::size_t t = 0; t < spec.time_bins; ++t)
        for (std::size_t f = 0; f < spec.freq_bins; ++f)
            for (std::size_t c = 0; c < 3; ++c) inflated.pixels[(t * inflated.width + f) * 3 + c] = spec.at(t, f);

    Tensor tokens = project_patches(unfold_patches(inflated, p), proj);
    if (pos != nullptr) {
        if (resize_pos) {
            tokens = add(tokens, resize_positional(*pos, gh, gw));
        } else if (pos->grid_h == gh && pos->grid_w == gw) {
            tokens = add(tokens, pos->table);
        }
    }
    return TokenSet{Modality::Audio, tokens, 0};
}

Tensor mha(const Tensor& x, const FrozenLayerWeights& w) {
    const std::size_t d = w.width();
    if (w.heads == 0 || d % w.heads != 0) {
        throw std::invalid_argument("mha: width " + std::to_string(d) + " is not divisible by " + std::to_string(w.heads) + " heads");
    }
    if (x.cols() != d) throw std::invalid_argument("mha: token width " + std::to_string(x.cols()) + " != " + std::to_string(d));
    OpScope scope("mha");
    const Tensor h = w.pre_norm ? layer_norm(x, w.ln1_gamma, w.ln1_beta) : x;
    Tensor q, k, v;
    {
        OpScope proj("qkv");
        q = matmul(h, w.wq);
        k = matmul(h, w.wk);
        v = matmul(h, w.wv);
    }
    const std::size_t dh = d / w.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> heads;
    heads.reserve(w.heads);
    {
        OpScope attn("attention");
        for (std::size_t j = 0; j < w.heads; ++j) {
            const Tensor qj = slice_cols(q, j * dh, dh);
            const Tensor kj = slice_cols(k, j * dh, dh);
            const Tensor vj = slice_cols(v, j * dh, dh);
            const Tensor probs = softmax_rows(scale(matmul(qj, transpose(kj)), inv_sqrt));
            heads.push_back(matmul(probs, vj));
        }
    }
    const Tensor merged = w.heads == 1 ? heads.front() : concat_cols(heads);
    OpScope out("out");
    return matmul(merged, w.wo);
}

Tensor mlp(const Tensor& x, const FrozenLayerWeights& w) {
    OpScope scope("mlp");
    const Tensor h = w.pre_norm ? layer_norm(x, w.ln2_gamma, w.ln2_beta) : x;
    const Tensor hidden = activate(add_row_bias(matmul(h, w.mlp_w1), w.mlp_b1), w.activation);
    return add_row_bias(matmul(hidden, w.mlp_w2), w.mlp_b2);
}

Tensor frozen_layer_forward(const Tensor& x, const FrozenLayerWeights& w) {
    const Tensor y = add(x, mha(x, w));
    return add(y, mlp(y, w));
}

void BackboneConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
    };
    positive(layers, "layers");
    positive(width, "d");
    positive(heads, "heads");
    positive(patch, "patch");
    positive(mlp_ratio, "mlp_ratio");
    positive(image_height, "image_height");
    positive(image_width, "image_width");
    positive(spec_time, "spec_time");
    positive(spec_freq, "spec_freq");
    if (width % heads != 0) throw std::invalid_argument("d must be divisible by heads");
    if (image_height % patch != 0) throw std::invalid_argument("image_height must be divisible by patch");
    if (image_width % patch != 0) throw std::invalid_argument("image_width must be divisible by patch");
    if (!(init_std > 0.0)) throw std::invalid_argument("init_std must be positive");
}

void FreezeRegistry::add(std::string name, Tensor tensor, bool frozen) {
    if (!tensor.defined()) throw std::invalid_argument("FreezeRegistry: '" + name + "' is undefined");
    for (const Entry& e : entries_) {
        if (e.name == name) throw std::invalid_argument("FreezeRegistry: duplicate name '" + name + "'");
        if (e.tensor.node() == tensor.node()) {
            throw std::invalid_argument("FreezeRegistry: '" + name + "' is already registered as '" + e.name + "'");
        }
    }
    tensor.set_requires_grad(!frozen);
    entries_.push_back(Entry{std::move(name), std::move(tensor), frozen});
}

std::vector<FreezeRegistry::Entry> FreezeRegistry::frozen() const {
    std::vector<Entry> out;
    for (const Entry& e : entries_)
        if (e.frozen) out.push_back(e);
    return out;
}

std::vector<FreezeRegistry::Entry> FreezeRegistry::trainable() const {
    std::vector<Entry> out;
    for (const Entry& e : entries_)
        if (!e.frozen) out.push_back(e);
    return out;
}

const FreezeRegistry::Entry* FreezeRegistry::find(const std::string& name) const {
    for (const Entry& e : entries_)
        if (e.name == name) return &e;
    return nullptr;
}

void FreezeRegistry::zero_grad() const {
    for (const Entry& e : entries_) {
        Tensor t = e.tensor;
        t.zero_grad();
    }
}

FrozenBackbone FrozenBackbone::random(const BackboneConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.width, hidden = cfg.mlp_ratio * cfg.width, pv = 3 * cfg.patch * cfg.patch;
    const double s = cfg.init_std;
    FrozenBackbone b;
    b.config = cfg;
    b.projection.patch = cfg.patch;
    b.projection.weight = random_normal({pv, d}, s, seed, "backbone.patch_embed.weight");
    b.projection.bias = Tensor::zeros({d});
    b.positional.grid_h = cfg.visual_grid_h();
    b.positional.grid_w = cfg.visual_grid_w();
    b.positional.table = random_normal({cfg.visual_tokens(), d}, s, seed, "backbone.pos_embed");
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = "backbone.layer" + std::to_string(l) + ".";
        FrozenLayerWeights w;
        w.wq = random_normal({d, d}, s, seed, p + "attn.wq");
        w.wk = random_normal({d, d}, s, seed, p + "attn.wk");
        w.wv = random_normal({d, d}, s, seed, p + "attn.wv");
        w.wo = random_normal({d, d}, s, seed, p + "attn.wo");
        w.mlp_w1 = random_normal({d, hidden}, s, seed, p + "mlp.w1");
        w.mlp_b1 = Tensor::zeros({hidden});
        w.mlp_w2 = random_normal({hidden, d}, s, seed, p + "mlp.w2");
        w.mlp_b2 = Tensor::zeros({d});
        w.ln1_gamma = Tensor::full({d}, 1.0);
        w.ln1_beta = Tensor::zeros({d});
        w.ln2_gamma = Tensor::full({d}, 1.0);
        w.ln2_beta = Tensor::zeros({d});
        w.heads = cfg.heads;
        w.activation = cfg.activation;
        b.layers.push_back(std::move(w));
    }
    return b;
}

void FrozenBackbone::register_into(FreezeRegistry& reg) const {
    reg.add("backbone.patch_embed.weight", projection.weight, true);
    reg.add("backbone.patch_embed.bias", projection.bias, true);
    reg.add("backbone.pos_embed", positional.table, true);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "backbone.layer" + std::to_string(l) + ".";
        const FrozenLayerWeights& w = layers[l];
        reg.add(p + "attn.wq", w.wq, true);
        reg.add(p + "attn.wk", w.wk, true);
        reg.add(p + "attn.wv", w.wv, true);
        reg.add(p + "attn.wo", w.wo, true);
        reg.add(p + "mlp.w1", w.mlp_w1, true);
        reg.add(p + "mlp.b1", w.mlp_b1, true);
        reg.add(p + "mlp.w2", w.mlp_w2, true);
        reg.add(p + "mlp.b2", w.mlp_b2, true);
        reg.add(p + "ln1.gamma", w.ln1_gamma, true);
        reg.add(p + "ln1.beta", w.ln1_beta, true);
        reg.add(p + "ln2.gamma", w.ln2_gamma, true);
        reg.add(p + "ln2.beta", w.ln2_beta, true);
    }
}

}  // namespace lavish
