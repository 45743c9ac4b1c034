// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Latent audio-visual hybrid adapter.
//
// One adapter site moves information from a source stream into a target
// stream:
//
//   S   = L + g_c * softmax(L X_s^T / sqrt(d)) X_s          (compression)
//   X_f = X_t + g_f * softmax(X_t S^T / sqrt(d)) S           (fusion)
//   Z   = up(act(down(X_f)))                                  (bottleneck)
//
// where L holds m trainable latent tokens owned by the site. The no-latent
// variant (AVisH) skips compression and fuses against the raw source tokens.
// Four sites per layer attach in parallel to MHA and MLP in both streams.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "lavish/backbone.hpp"

namespace lavish {

enum class Direction { A2V, V2A };
enum class Attachment { MhaParallel, MlpParallel };
enum class FusionMode { None, A2V, V2A, Bidirectional };

std::string_view direction_name(Direction d);
std::string_view fusion_mode_name(FusionMode m);
FusionMode parse_fusion_mode(const std::string& name);
bool mode_enables(FusionMode mode, Direction dir);

struct LatentTokens {
    Modality modality = Modality::Audio;
    std::size_t layer = 0;
    Tensor tokens;  // m x d

    std::size_t count() const { return tokens.rows(); }
};

struct CmaParams {
    Tensor gate;  // one element
};

struct BottleneckParams {
    std::size_t width = 0;      // d
    std::size_t reduction = 1;  // rho, hidden = d / rho
    std::size_t groups = 1;     // G
    Activation activation = Activation::Gelu;
    Tensor down_weight;  // {G, d/G, hidden/G}
    Tensor down_bias;    // hidden, undefined when biases are off
    Tensor up_weight;    // {G, hidden/G, d/G}, zero at init
    Tensor up_bias;      // d, undefined when biases are off

    std::size_t hidden() const { return width / reduction; }
    bool has_bias() const { return down_bias.defined(); }

    // Down weights ~ N(0, 1/(d/G)), up weights and biases zero. Throws
    // std::invalid_argument unless rho | d, G | d and G | d/rho.
    static BottleneckParams make(std::size_t d, std::size_t reduction, std::size_t groups, Activation act, bool bias,
                                 std::uint64_t seed, const std::string& name);
};

struct LavishSite {
    std::string name;
    Direction direction = Direction::A2V;
    Attachment attachment = Attachment::MhaParallel;
    std::size_t layer = 0;
    bool use_latents = true;
    LatentTokens latents;   // source modality; undefined tokens when !use_latents
    CmaParams compression;  // undefined gate when !use_latents
    CmaParams fusion;
    BottleneckParams bottleneck;

    Modality source_modality() const { return direction == Direction::A2V ? Modality::Audio : Modality::Visual; }
    Modality target_modality() const { return direction == Direction::A2V ? Modality::Visual : Modality::Audio; }

    // "a2v_mha", "v2a_mlp", ...; used as the operation-count label.
    std::string label() const;

    void register_into(FreezeRegistry& reg) const;
};

struct SiteOptions {
    std::size_t latents = 2;
    std::size_t reduction = 8;
    std::size_t groups = 2;
    Activation activation = Activation::Relu;
    bool bias = true;
    bool use_latents = true;
    double latent_std = 0.02;
};

// Builds a site with closed gates, zero up-projection and seeded latents.
LavishSite make_site(std::size_t layer, Direction dir, Attachment attach, std::size_t width, const SiteOptions& opts,
                     std::uint64_t seed);

// q + g * softmax(q k^T / sqrt(d)) v
Tensor cma(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& gate);

Tensor compress_to_latents(const LatentTokens& latents, const TokenSet& x, const CmaParams& p);
Tensor fuse_with_latents(const TokenSet& x, const Tensor& summary, const CmaParams& p);
Tensor bottleneck(const Tensor& x, const BottleneckParams& b);

// Additive term the site contributes to the target stream.
Tensor lavish_forward(const TokenSet& source, const TokenSet& target, const LavishSite& site);

struct LayerAdapters {
    std::optional<LavishSite> a2v_mha;
    std::optional<LavishSite> a2v_mlp;
    std::optional<LavishSite> v2a_mha;
    std::optional<LavishSite> v2a_mlp;
};

// One augmented layer for both streams. All MHA-parallel terms read the
// pre-layer states (X_a, X_v); all MLP-parallel terms read the post-attention
// states (Y_a, Y_v). Directions disabled by mode or with no site contribute
// nothing. Returns (audio, visual) at layer index + 1.
std::pair<TokenSet, TokenSet> dual_layer_forward(const TokenSet& xa, const TokenSet& xv, const FrozenLayerWeights& w,
                                                 const LayerAdapters& sites, FusionMode mode);

}  // namespace lavish
