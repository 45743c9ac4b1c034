// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/model.hpp"

#include <stdexcept>

#include "lavish/op_counter.hpp"

namespace lavish {

void ModelConfig::validate() const {
    backbone.validate();
    const std::size_t d = backbone.width;
    const SiteOptions& s = adapter.site;
    if (adapter.mode != FusionMode::None) {
        if (s.use_latents && s.latents == 0) throw std::invalid_argument("m must be at least 1");
        if (s.reduction == 0 || d % s.reduction != 0) throw std::invalid_argument("rho must divide d");
        if (s.groups == 0 || d % s.groups != 0 || (d / s.reduction) % s.groups != 0) {
            throw std::invalid_argument("groups must divide d and d/rho");
        }
    }
    if (head && classes < 2) throw std::invalid_argument("classes must be at least 2");
}

LavishModel::LavishModel(const ModelConfig& cfg, std::uint64_t seed) : config_(cfg) {
    config_.validate();
    backbone_ = FrozenBackbone::random(cfg.backbone, seed);
    backbone_.register_into(registry_);
    const std::size_t d = cfg.backbone.width;
    adapters_.resize(cfg.backbone.layers);
    for (std::size_t l = 0; l < cfg.backbone.layers; ++l) {
        LayerAdapters& la = adapters_[l];
        if (mode_enables(cfg.adapter.mode, Direction::A2V)) {
            la.a2v_mha = make_site(l, Direction::A2V, Attachment::MhaParallel, d, cfg.adapter.site, seed);
            la.a2v_mlp = make_site(l, Direction::A2V, Attachment::MlpParallel, d, cfg.adapter.site, seed);
        }
        if (mode_enables(cfg.adapter.mode, Direction::V2A)) {
            la.v2a_mha = make_site(l, Direction::V2A, Attachment::MhaParallel, d, cfg.adapter.site, seed);
            la.v2a_mlp = make_site(l, Direction::V2A, Attachment::MlpParallel, d, cfg.adapter.site, seed);
        }
        for (const auto* site : {&la.a2v_mha, &la.a2v_mlp, &la.v2a_mha, &la.v2a_mlp}) {
            if (*site) (*site)->register_into(registry_);
        }
    }
    if (cfg.head) {
        head_ = EventHead::make(d, cfg.classes, seed);
        head_->register_into(registry_);
    }
}

std::pair<TokenSet, TokenSet> LavishModel::run(const ImageInput& img, const SpectrogramInput& spec, FusionMode mode) const {
    TokenSet xv, xa;
    {
        OpScope s("visual");
        xv = backbone_.embed_image(img);
    }
    {
        OpScope s("audio");
        xa = backbone_.embed_spectrogram(spec);
    }
    for (std::size_t l = 0; l < backbone_.layers.size(); ++l) {
        OpScope s("layer" + std::to_string(l));
        std::tie(xa, xv) = dual_layer_forward(xa, xv, backbone_.layers[l], adapters_[l], mode);
    }
    return {xa, xv};
}

std::pair<TokenSet, TokenSet> LavishModel::encode(const ImageInput& img, const SpectrogramInput& spec) const {
    return run(img, spec, config_.adapter.mode);
}

std::pair<TokenSet, TokenSet> LavishModel::encode_frozen(const ImageInput& img, const SpectrogramInput& spec) const {
    return run(img, spec, FusionMode::None);
}

Tensor LavishModel::logits(const ImageInput& img, const SpectrogramInput& spec) const {
    if (!head_) throw std::logic_error("logits: model was built without an event head");
    const auto [xa, xv] = encode(img, spec);
    return event_head(xa, xv, *head_);
}

Tensor LavishModel::logits_frozen(const ImageInput& img, const SpectrogramInput& spec) const {
    if (!head_) throw std::logic_error("logits: model was built without an event head");
    const auto [xa, xv] = encode_frozen(img, spec);
    return event_head(xa, xv, *head_);
}

}  // namespace lavish
