// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/adapter.hpp"

#include <cmath>
#include <stdexcept>

#include "lavish/op_counter.hpp"

namespace lavish {

std::string_view direction_name(Direction d) { return d == Direction::A2V ? "a2v" : "v2a"; }

std::string_view fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::None: return "none";
        case FusionMode::A2V: return "a2v";
        case FusionMode::V2A: return "v2a";
        case FusionMode::Bidirectional: return "bidirectional";
    }
    return "none";
}

FusionMode parse_fusion_mode(const std::string& name) {
    if (name == "none") return FusionMode::None;
    if (name == "a2v") return FusionMode::A2V;
    if (name == "v2a") return FusionMode::V2A;
    if (name == "bidirectional") return FusionMode::Bidirectional;
    throw std::invalid_argument("mode: unknown fusion mode '" + name + "'");
}

bool mode_enables(FusionMode mode, Direction dir) {
    if (mode == FusionMode::Bidirectional) return true;
    if (mode == FusionMode::A2V) return dir == Direction::A2V;
    if (mode == FusionMode::V2A) return dir == Direction::V2A;
    return false;
}

BottleneckParams BottleneckParams::make(std::size_t d, std::size_t reduction, std::size_t groups, Activation act, bool bias,
                                        std::uint64_t seed, const std::string& name) {
    if (reduction == 0 || d % reduction != 0) {
        throw std::invalid_argument("rho: width " + std::to_string(d) + " is not divisible by reduction " + std::to_string(reduction));
    }
    const std::size_t hidden = d / reduction;
    if (groups == 0 || d % groups != 0 || hidden % groups != 0) {
        throw std::invalid_argument("groups: " + std::to_string(groups) + " must divide both width " + std::to_string(d) +
                                    " and bottleneck width " + std::to_string(hidden));
    }
    BottleneckParams b;
    b.width = d;
    b.reduction = reduction;
    b.groups = groups;
    b.activation = act;
    const std::size_t in_g = d / groups, hid_g = hidden / groups;
    b.down_weight = random_normal({groups, in_g, hid_g}, 1.0 / std::sqrt(static_cast<double>(in_g)), seed, name + ".down.weight");
    b.up_weight = Tensor::zeros({groups, hid_g, in_g});
    if (bias) {
        b.down_bias = Tensor::zeros({hidden});
        b.up_bias = Tensor::zeros({d});
    }
    return b;
}

std::string LavishSite::label() const {
    return std::string(direction_name(direction)) + (attachment == Attachment::MhaParallel ? "_mha" : "_mlp");
}

void LavishSite::register_into(FreezeRegistry& reg) const {
    if (use_latents) {
        reg.add(name + ".latents", latents.tokens, false);
        reg.add(name + ".compression.gate", compression.gate, false);
    }
    reg.add(name + ".fusion.gate", fusion.gate, false);
    reg.add(name + ".down.weight", bottleneck.down_weight, false);
    if (bottleneck.has_bias()) reg.add(name + ".down.bias", bottleneck.down_bias, false);
    reg.add(name + ".up.weight", bottleneck.up_weight, false);
    if (bottleneck.has_bias()) reg.add(name + ".up.bias", bottleneck.up_bias, false);
}

LavishSite make_site(std::size_t layer, Direction dir, Attachment attach, std::size_t width, const SiteOptions& opts,
                     std::uint64_t seed) {
    if (opts.use_latents && opts.latents == 0) throw std::invalid_argument("m: at least one latent token is required");
    LavishSite s;
    s.direction = dir;
    s.attachment = attach;
    s.name = "adapter.layer" + std::to_string(layer) + "." + s.label();
    s.layer = layer;
    s.use_latents = opts.use_latents;
    s.latents.modality = s.source_modality();
    s.latents.layer = layer;
    if (opts.use_latents) {
        s.latents.tokens = random_normal({opts.latents, width}, opts.latent_std, seed, s.name + ".latents");
        s.compression.gate = Tensor::scalar(0.0);
    }
    s.fusion.gate = Tensor::scalar(0.0);
    s.bottleneck = BottleneckParams::make(width, opts.reduction, opts.groups, opts.activation, opts.bias, seed, s.name);
    return s;
}

Tensor cma(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& gate) {
    if (q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows()) {
        throw std::invalid_argument("cma: width mismatch q" + shape_to_string(q.shape()) + " k" + shape_to_string(k.shape()) +
                                    " v" + shape_to_string(v.shape()));
    }
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores;
    {
        OpScope s("scores");
        scores = matmul(q, transpose(k));
    }
    const Tensor probs = softmax_rows(scale(scores, inv_sqrt));
    OpScope s("weighted");
    return add(q, mul_scalar(matmul(probs, v), gate));
}

Tensor compress_to_latents(const LatentTokens& latents, const TokenSet& x, const CmaParams& p) {
    if (!x.tokens.defined() || x.count() == 0) throw std::invalid_argument("compress_to_latents: empty token set");
    if (x.modality != latents.modality) {
        throw std::invalid_argument("compress_to_latents: " + std::string(modality_name(latents.modality)) +
                                    " latents cannot summarize " + std::string(modality_name(x.modality)) + " tokens");
    }
    OpScope scope("compression");
    return cma(latents.tokens, x.tokens, x.tokens, p.gate);
}

Tensor fuse_with_latents(const TokenSet& x, const Tensor& summary, const CmaParams& p) {
    if (x.width() != summary.cols()) {
        throw std::invalid_argument("fuse_with_latents: width mismatch " + shape_to_string(x.tokens.shape()) + " vs " +
                                    shape_to_string(summary.shape()));
    }
    OpScope scope("fusion");
    return cma(x.tokens, summary, summary, p.gate);
}

Tensor bottleneck(const Tensor& x, const BottleneckParams& b) {
    if (x.cols() != b.width) throw std::invalid_argument("bottleneck: width mismatch");
    OpScope scope("bottleneck");
    Tensor h = grouped_linear(x, b.down_weight);
    if (b.has_bias()) h = add_row_bias(h, b.down_bias);
    h = activate(h, b.activation);
    Tensor out = grouped_linear(h, b.up_weight);
    if (b.has_bias()) out = add_row_bias(out, b.up_bias);
    return out;
}

Tensor lavish_forward(const TokenSet& source, const TokenSet& target, const LavishSite& site) {
    if (source.modality != site.source_modality() || target.modality != site.target_modality()) {
        throw std::invalid_argument("lavish_forward: site " + site.name + " expects " +
                                    std::string(modality_name(site.source_modality())) + " -> " +
                                    std::string(modality_name(site.target_modality())) + " but got " +
                                    std::string(modality_name(source.modality)) + " -> " +
                                    std::string(modality_name(target.modality)));
    }
    OpScope scope("adapter." + site.label());
    Tensor fused;
    if (site.use_latents) {
        const Tensor summary = compress_to_latents(site.latents, source, site.compression);
        fused = fuse_with_latents(target, summary, site.fusion);
    } else {
        OpScope direct("fusion");
        fused = cma(target.tokens, source.tokens, source.tokens, site.fusion.gate);
    }
    return bottleneck(fused, site.bottleneck);
}

std::pair<TokenSet, TokenSet> dual_layer_forward(const TokenSet& xa, const TokenSet& xv, const FrozenLayerWeights& w,
                                                 const LayerAdapters& sites, FusionMode mode) {
    if (xa.layer != xv.layer) {
        throw std::invalid_argument("dual_layer_forward: audio at layer " + std::to_string(xa.layer) + " but visual at layer " +
                                    std::to_string(xv.layer));
    }
    if (xa.modality != Modality::Audio || xv.modality != Modality::Visual) {
        throw std::invalid_argument("dual_layer_forward: expected (audio, visual) token sets");
    }
    const bool a2v = mode_enables(mode, Direction::A2V);
    const bool v2a = mode_enables(mode, Direction::V2A);
    const std::size_t next = xa.layer + 1;

    // Both MHA-parallel adapter terms read the pre-layer states.
    std::optional<Tensor> lav_v, lav_a;
    if (a2v && sites.a2v_mha) lav_v = lavish_forward(xa, xv, *sites.a2v_mha);
    if (v2a && sites.v2a_mha) lav_a = lavish_forward(xv, xa, *sites.v2a_mha);

    auto attn_v = [&] {
        OpScope s("visual");
        return mha(xv.tokens, w);
    }();
    auto attn_a = [&] {
        OpScope s("audio");
        return mha(xa.tokens, w);
    }();
    Tensor yv = add(xv.tokens, attn_v);
    if (lav_v) yv = add(yv, *lav_v);
    Tensor ya = add(xa.tokens, attn_a);
    if (lav_a) ya = add(ya, *lav_a);
    const TokenSet ya_set{Modality::Audio, ya, xa.layer};
    const TokenSet yv_set{Modality::Visual, yv, xv.layer};

    std::optional<Tensor> mlp_lav_v, mlp_lav_a;
    if (a2v && sites.a2v_mlp) mlp_lav_v = lavish_forward(ya_set, yv_set, *sites.a2v_mlp);
    if (v2a && sites.v2a_mlp) mlp_lav_a = lavish_forward(yv_set, ya_set, *sites.v2a_mlp);

    auto ff_v = [&] {
        OpScope s("visual");
        return mlp(yv, w);
    }();
    auto ff_a = [&] {
        OpScope s("audio");
        return mlp(ya, w);
    }();
    Tensor out_v = add(yv, ff_v);
    if (mlp_lav_v) out_v = add(out_v, *mlp_lav_v);
    Tensor out_a = add(ya, ff_a);
    if (mlp_lav_a) out_a = add(out_a, *mlp_lav_a);
    return {TokenSet{Modality::Audio, out_a, next}, TokenSet{Modality::Visual, out_v, next}};
}

}  // namespace lavish
