// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frozen two-stream transformer backbone: patch tokenizers for RGB frames and
// single-channel spectrograms, pre-norm multi-head attention and MLP blocks,
// and the registry that separates frozen weights from trainable ones.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lavish/tensor.hpp"

namespace lavish {

enum class Modality { Audio, Visual };
std::string_view modality_name(Modality m);

// H x W x 3, row-major with channels innermost, values in [0, 1].
struct ImageInput {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;

    double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
};

// M time bins x C frequency bins, one channel, row-major.
struct SpectrogramInput {
    std::size_t time_bins = 0;
    std::size_t freq_bins = 0;
    std::vector<double> values;

    double at(std::size_t t, std::size_t f) const { return values[t * freq_bins + f]; }
};

struct TokenSet {
    Modality modality = Modality::Visual;
    Tensor tokens;  // count x d
    std::size_t layer = 0;

    std::size_t count() const { return tokens.rows(); }
    std::size_t width() const { return tokens.cols(); }
};

enum class Activation { Gelu, Relu };
Tensor activate(const Tensor& x, Activation act);
std::string_view activation_name(Activation act);
Activation parse_activation(const std::string& name);

struct FrozenLayerWeights {
    Tensor wq, wk, wv, wo;            // d x d, no biases
    Tensor mlp_w1, mlp_b1;            // d x hidden, hidden
    Tensor mlp_w2, mlp_b2;            // hidden x d, d
    Tensor ln1_gamma, ln1_beta;       // before attention
    Tensor ln2_gamma, ln2_beta;       // before the MLP
    std::size_t heads = 1;
    bool pre_norm = true;
    Activation activation = Activation::Gelu;

    std::size_t width() const { return wq.rows(); }
};

// Linear patch projection shared by both modalities: a flattened patch of
// 3 * patch * patch values, ordered (channel, row, column), maps to d.
struct PatchProjection {
    std::size_t patch = 0;
    Tensor weight;  // (3 * patch * patch) x d
    Tensor bias;    // d
};

struct PositionalTable {
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    Tensor table;  // (grid_h * grid_w) x d
};

// Unfolds an image into one row per patch, patches in row-major grid order.
Tensor unfold_patches(const ImageInput& img, std::size_t patch);

// Bilinear resize of a positional table to a new grid (half-pixel centers,
// edge clamping). Returns the table unchanged when the grid already matches.
Tensor resize_positional(const PositionalTable& pos, std::size_t grid_h, std::size_t grid_w);

// Tokenizes an RGB frame; pos may be null for a projection-only embedding.
TokenSet patch_embed(const ImageInput& img, const PatchProjection& proj, const PositionalTable* pos);

// Zero-pads the spectrogram to a multiple of the patch size, replicates its
// channel three times and applies the image projection. With resize_pos set,
// the visual positional table is bilinearly resized to the audio grid; with
// it unset, positional embeddings are added only when the grids coincide.
TokenSet spectrogram_embed(const SpectrogramInput& spec, const PatchProjection& proj, const PositionalTable* pos,
                           bool resize_pos = true);

// Pre-norm multi-head scaled dot-product self-attention. Returns the update
// only; the caller adds the residual.
Tensor mha(const Tensor& x, const FrozenLayerWeights& w);
// Pre-norm d -> hidden -> d MLP; returns the update only.
Tensor mlp(const Tensor& x, const FrozenLayerWeights& w);

// Plain frozen layer: Y = X + MHA(X); X' = Y + MLP(Y).
Tensor frozen_layer_forward(const Tensor& x, const FrozenLayerWeights& w);

struct BackboneConfig {
    std::size_t layers = 2;
    std::size_t width = 32;
    std::size_t heads = 2;
    std::size_t patch = 8;
    std::size_t mlp_ratio = 4;
    std::size_t image_height = 16;
    std::size_t image_width = 16;
    std::size_t spec_time = 16;
    std::size_t spec_freq = 16;
    Activation activation = Activation::Gelu;
    bool resize_audio_pos = true;
    double init_std = 0.02;

    std::size_t visual_grid_h() const { return image_height / patch; }
    std::size_t visual_grid_w() const { return image_width / patch; }
    std::size_t audio_grid_h() const { return (spec_time + patch - 1) / patch; }
    std::size_t audio_grid_w() const { return (spec_freq + patch - 1) / patch; }
    std::size_t visual_tokens() const { return visual_grid_h() * visual_grid_w(); }
    std::size_t audio_tokens() const { return audio_grid_h() * audio_grid_w(); }

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

class FreezeRegistry {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        bool frozen = true;
    };

    // Registers a parameter and sets its requires_grad to !frozen. Names and
    // tensors must be unique.
    void add(std::string name, Tensor tensor, bool frozen);

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry> frozen() const;
    std::vector<Entry> trainable() const;
    const Entry* find(const std::string& name) const;
    std::size_t size() const { return entries_.size(); }

    void zero_grad() const;

private:
    std::vector<Entry> entries_;
};

// All weights of the shared frozen backbone.
struct FrozenBackbone {
    BackboneConfig config;
    PatchProjection projection;
    PositionalTable positional;
    std::vector<FrozenLayerWeights> layers;

    // Linear weights and tables ~ N(0, init_std), biases zero, norms (1, 0).
    // Each tensor draws from its own name-keyed stream.
    static FrozenBackbone random(const BackboneConfig& cfg, std::uint64_t seed);

    void register_into(FreezeRegistry& reg) const;

    TokenSet embed_image(const ImageInput& img) const { return patch_embed(img, projection, &positional); }
    TokenSet embed_spectrogram(const SpectrogramInput& spec) const {
        return spectrogram_embed(spec, projection, &positional, config.resize_audio_pos);
    }
};

// Fills a tensor with N(0, std) from the stream named after the parameter.
Tensor random_normal(const Shape& shape, double stddev, std::uint64_t seed, const std::string& name,
                     bool requires_grad = false);

}  // namespace lavish
