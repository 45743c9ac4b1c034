// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "lavish/adapter.hpp"
#include "lavish/event_head.hpp"

namespace lavish {

struct AdapterConfig {
    FusionMode mode = FusionMode::Bidirectional;
    SiteOptions site;
};

struct ModelConfig {
    BackboneConfig backbone;
    AdapterConfig adapter;
    bool head = true;
    std::size_t classes = 2;

    void validate() const;
};

// Frozen shared backbone, per-layer adapter sites for the enabled directions
// and an event head. Every tensor is registered exactly once.
class LavishModel {
public:
    LavishModel(const ModelConfig& cfg, std::uint64_t seed);

    // Non-copyable: the registry holds handles to this instance's tensors.
    LavishModel(const LavishModel&) = delete;
    LavishModel& operator=(const LavishModel&) = delete;
    LavishModel(LavishModel&&) = default;

    const ModelConfig& config() const { return config_; }
    const FrozenBackbone& backbone() const { return backbone_; }
    const std::vector<LayerAdapters>& adapters() const { return adapters_; }
    const std::optional<EventHead>& head() const { return head_; }
    const FreezeRegistry& registry() const { return registry_; }

    // Final-layer (audio, visual) token sets.
    std::pair<TokenSet, TokenSet> encode(const ImageInput& img, const SpectrogramInput& spec) const;
    // Same pass with every adapter term dropped.
    std::pair<TokenSet, TokenSet> encode_frozen(const ImageInput& img, const SpectrogramInput& spec) const;

    Tensor logits(const ImageInput& img, const SpectrogramInput& spec) const;
    Tensor logits_frozen(const ImageInput& img, const SpectrogramInput& spec) const;

private:
    std::pair<TokenSet, TokenSet> run(const ImageInput& img, const SpectrogramInput& spec, FusionMode mode) const;

    ModelConfig config_;
    FrozenBackbone backbone_;
    std::vector<LayerAdapters> adapters_;
    std::optional<EventHead> head_;
    FreezeRegistry registry_;
};

}  // namespace lavish
