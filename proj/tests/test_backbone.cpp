// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "lavish/backbone.hpp"
#include "lavish/model.hpp"
#include "test_util.hpp"

namespace lavish {
namespace {

using testing::max_abs_diff;
using testing::naive_matmul;
using testing::uniform_tensor;

Tensor identity(std::size_t d) {
    std::vector<double> v(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
    return Tensor::from({d, d}, std::move(v));
}

FrozenLayerWeights random_layer(std::size_t d, std::size_t heads, std::uint64_t seed) {
    FrozenLayerWeights w;
    w.wq = uniform_tensor({d, d}, seed, "wq");
    w.wk = uniform_tensor({d, d}, seed, "wk");
    w.wv = uniform_tensor({d, d}, seed, "wv");
    w.wo = uniform_tensor({d, d}, seed, "wo");
    w.mlp_w1 = uniform_tensor({d, 4 * d}, seed, "w1");
    w.mlp_b1 = uniform_tensor({4 * d}, seed, "b1");
    w.mlp_w2 = uniform_tensor({4 * d, d}, seed, "w2");
    w.mlp_b2 = uniform_tensor({d}, seed, "b2");
    w.ln1_gamma = uniform_tensor({d}, seed, "g1", 0.5, 1.5);
    w.ln1_beta = uniform_tensor({d}, seed, "be1");
    w.ln2_gamma = uniform_tensor({d}, seed, "g2", 0.5, 1.5);
    w.ln2_beta = uniform_tensor({d}, seed, "be2");
    w.heads = heads;
    return w;
}

FrozenLayerWeights identity_attention(std::size_t d) {
    FrozenLayerWeights w = random_layer(d, 1, 0);
    w.wq = w.wk = w.wv = w.wo = identity(d);
    w.pre_norm = false;
    return w;
}

ImageInput random_image(std::size_t h, std::size_t wd, std::uint64_t seed) {
    ImageInput img{h, wd, {}};
    Rng r(seed, "img");
    img.pixels.resize(h * wd * 3);
    for (double& p : img.pixels) p = r.uniform();
    return img;
}

PatchProjection random_projection(std::size_t patch, std::size_t d, std::uint64_t seed) {
    return {patch, uniform_tensor({3 * patch * patch, d}, seed, "proj"), uniform_tensor({d}, seed, "bias")};
}

TEST(PatchEmbed, TokenCount) {
    const auto proj = random_projection(4, 6, 1);
    EXPECT_EQ(patch_embed(random_image(8, 8, 1), proj, nullptr).count(), 4u);
    EXPECT_EQ(patch_embed(random_image(12, 8, 1), proj, nullptr).count(), 6u);
}

TEST(PatchEmbed, ZeroImageZeroTableGivesZeroTokens) {
    PatchProjection proj = random_projection(4, 6, 1);
    proj.bias = Tensor::zeros({6});
    ImageInput img{8, 8, std::vector<double>(8 * 8 * 3, 0.0)};
    const PositionalTable pos{2, 2, Tensor::zeros({4, 6})};
    const TokenSet t = patch_embed(img, proj, &pos);
    for (double v : t.tokens.data()) EXPECT_EQ(v, 0.0);
}

TEST(PatchEmbed, MatchesUnfoldOracle) {
    const std::size_t p = 4, d = 5;
    const ImageInput img = random_image(16, 16, 2);
    const auto proj = random_projection(p, d, 2);
    const PositionalTable pos{4, 4, uniform_tensor({16, d}, 2, "pos")};
    // Oracle unfolds directly from the HWC buffer in (channel, row, column) order.
    std::vector<double> patches;
    for (std::size_t gy = 0; gy < 4; ++gy)
        for (std::size_t gx = 0; gx < 4; ++gx)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < p; ++y)
                    for (std::size_t x = 0; x < p; ++x)
                        patches.push_back(img.pixels[((gy * p + y) * 16 + gx * p + x) * 3 + c]);
    auto expect = naive_matmul(patches, proj.weight.data(), 16, 3 * p * p, d);
    for (std::size_t t = 0; t < 16; ++t)
        for (std::size_t j = 0; j < d; ++j) expect[t * d + j] += proj.bias.at(j) + pos.table.at(t, j);
    EXPECT_LT(max_abs_diff(patch_embed(img, proj, &pos).tokens.data(), expect), 1e-12);
}

TEST(PatchEmbed, RejectsIndivisibleImage) {
    EXPECT_THROW(patch_embed(random_image(10, 8, 0), random_projection(4, 3, 0), nullptr), std::invalid_argument);
}

TEST(SpectrogramEmbed, ZeroMatchesZeroImage) {
    const auto proj = random_projection(4, 6, 3);
    SpectrogramInput spec{8, 8, std::vector<double>(64, 0.0)};
    ImageInput img{8, 8, std::vector<double>(8 * 8 * 3, 0.0)};
    EXPECT_EQ(max_abs_diff(spectrogram_embed(spec, proj, nullptr).tokens.data(), patch_embed(img, proj, nullptr).tokens.data()),
              0.0);
}

TEST(SpectrogramEmbed, ConstantReplicatesChannel) {
    const auto proj = random_projection(4, 6, 3);
    const double v = 0.37;
    SpectrogramInput spec{4, 4, std::vector<double>(16, v)};
    const Tensor tok = spectrogram_embed(spec, proj, nullptr).tokens;
    for (std::size_t j = 0; j < 6; ++j) {
        double e = proj.bias.at(j);
        for (std::size_t i = 0; i < 48; ++i) e += v * proj.weight.at(i, j);
        EXPECT_NEAR(tok.at(0, j), e, 1e-12);
    }
}

TEST(SpectrogramEmbed, PadsAndMatchesReplicateOracle) {
    const std::size_t p = 4, d = 3;
    SpectrogramInput spec{12, 8, {}};
    Rng r(4, "spec");
    spec.values.resize(96);
    for (double& x : spec.values) x = r.normal();
    const auto proj = random_projection(p, d, 4);
    const Tensor tok = spectrogram_embed(spec, proj, nullptr).tokens;
    ASSERT_EQ(tok.rows(), 6u);
    ImageInput rep{12, 8, {}};
    for (double x : spec.values) rep.pixels.insert(rep.pixels.end(), {x, x, x});
    EXPECT_LT(max_abs_diff(tok.data(), patch_embed(rep, proj, nullptr).tokens.data()), 1e-12);

    SpectrogramInput odd{10, 7, std::vector<double>(70, 1.0)};
    EXPECT_EQ(spectrogram_embed(odd, proj, nullptr).count(), 3u * 2u);
}

TEST(SpectrogramEmbed, RejectsNonFinite) {
    SpectrogramInput spec{4, 4, std::vector<double>(16, 0.0)};
    spec.values[5] = std::nan("");
    EXPECT_THROW(spectrogram_embed(spec, random_projection(4, 2, 0), nullptr), std::domain_error);
}

TEST(PositionalResize, IdentityAndConstant) {
    const PositionalTable pos{2, 3, uniform_tensor({6, 4}, 5, "pos")};
    EXPECT_EQ(resize_positional(pos, 2, 3).node(), pos.table.node());
    const PositionalTable flat{2, 2, Tensor::full({4, 3}, 0.25)};
    const Tensor resized = resize_positional(flat, 5, 3);
    for (double v : resized.data()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(PositionalResize, HalfPixelBilinearOracle) {
    // 1 x 2 source row [a, b] resized to width 4: centers at -0.25, 0.25, 0.75, 1.25 (clamped).
    const PositionalTable pos{1, 2, Tensor::from({2, 1}, {1.0, 3.0})};
    const Tensor out = resize_positional(pos, 1, 4);
    const std::vector<double> expect{1.0, 1.5, 2.5, 3.0};
    EXPECT_LT(max_abs_diff(out.data(), expect), 1e-15);
}

TEST(Mha, SingleTokenIdentityWeights) {
    const auto w = identity_attention(4);
    const Tensor x = Tensor::from({1, 4}, {0.5, -1, 2, 3});
    EXPECT_LT(max_abs_diff(mha(x, w).data(), x.data()), 1e-15);
}

TEST(Mha, IdenticalTokensIdentityWeights) {
    const auto w = identity_attention(3);
    const Tensor x = Tensor::from({2, 3}, {1, 2, 3, 1, 2, 3});
    EXPECT_LT(max_abs_diff(mha(x, w).data(), x.data()), 1e-15);
}

TEST(Mha, MatchesPerHeadOracle) {
    const std::size_t d = 6, h = 2, n = 5, dh = 3;
    const auto w = random_layer(d, h, 6);
    const Tensor x = uniform_tensor({n, d}, 6, "x");
    const Tensor xn = layer_norm(x, w.ln1_gamma, w.ln1_beta);
    const auto q = naive_matmul(xn.data(), w.wq.data(), n, d, d);
    const auto k = naive_matmul(xn.data(), w.wk.data(), n, d, d);
    const auto v = naive_matmul(xn.data(), w.wv.data(), n, d, d);
    std::vector<double> merged(n * d, 0.0);
    for (std::size_t hd = 0; hd < h; ++hd) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> s(n);
            double mx = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dh; ++c) acc += q[i * d + hd * dh + c] * k[j * d + hd * dh + c];
                s[j] = acc / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, s[j]);
            }
            double z = 0.0;
            for (double& e : s) z += (e = std::exp(e - mx));
            for (std::size_t c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += s[j] / z * v[j * d + hd * dh + c];
                merged[i * d + hd * dh + c] = acc;
            }
        }
    }
    EXPECT_LT(max_abs_diff(mha(x, w).data(), naive_matmul(merged, w.wo.data(), n, d, d)), 1e-10);
}

TEST(Mha, RejectsIndivisibleHeads) {
    auto w = random_layer(6, 4, 0);
    EXPECT_THROW(mha(uniform_tensor({2, 6}, 0, "x"), w), std::invalid_argument);
}

TEST(Mha, PermutationEquivariant) {
    const std::size_t d = 8, n = 6;
    const auto w = random_layer(d, 2, 7);
    const Tensor x = uniform_tensor({n, d}, 7, "x");
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<Tensor> rows;
    for (std::size_t i : perm) rows.push_back(slice_rows(x, i, 1));
    const Tensor y = mha(x, w), yp = mha(concat_rows(rows), w);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(yp.at(i, c), y.at(perm[i], c), 1e-12);
}

TEST(Mlp, ZeroWeightsGiveZero) {
    auto w = random_layer(4, 1, 8);
    w.mlp_w1 = Tensor::zeros({4, 16});
    w.mlp_b1 = Tensor::zeros({16});
    w.mlp_w2 = Tensor::zeros({16, 4});
    w.mlp_b2 = Tensor::zeros({4});
    const Tensor y = mlp(uniform_tensor({3, 4}, 8, "x"), w);
    for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, OneWideReluPassesValueThrough) {
    FrozenLayerWeights w;
    w.wq = w.wk = w.wv = w.wo = identity(1);
    w.mlp_w1 = Tensor::from({1, 4}, {1, 0, 0, 0});
    w.mlp_b1 = Tensor::zeros({4});
    w.mlp_w2 = Tensor::from({4, 1}, {1, 0, 0, 0});
    w.mlp_b2 = Tensor::zeros({1});
    w.activation = Activation::Relu;
    w.pre_norm = false;
    EXPECT_EQ(mlp(Tensor::from({1, 1}, {2.0}), w).item(), 2.0);
}

TEST(Mlp, MatchesScalarOracle) {
    const std::size_t d = 4, n = 3;
    const auto w = random_layer(d, 1, 9);
    const Tensor x = uniform_tensor({n, d}, 9, "x");
    const Tensor xn = layer_norm(x, w.ln2_gamma, w.ln2_beta);
    auto hid = naive_matmul(xn.data(), w.mlp_w1.data(), n, d, 4 * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 4 * d; ++j) {
            const double a = hid[i * 4 * d + j] + w.mlp_b1.at(j);
            hid[i * 4 * d + j] = 0.5 * a * (1.0 + std::tanh(0.7978845608028654 * (a + 0.044715 * a * a * a)));
        }
    auto out = naive_matmul(hid, w.mlp_w2.data(), n, 4 * d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] += w.mlp_b2.at(j);
    EXPECT_LT(max_abs_diff(mlp(x, w).data(), out), 1e-12);
}

TEST(FreezeRegistry, RejectsDuplicatesAndSetsFlags) {
    FreezeRegistry reg;
    Tensor a = Tensor::zeros({2}), b = Tensor::zeros({3});
    reg.add("a", a, true);
    reg.add("b", b, false);
    EXPECT_FALSE(a.requires_grad());
    EXPECT_TRUE(b.requires_grad());
    EXPECT_THROW(reg.add("a", Tensor::zeros({1}), true), std::invalid_argument);
    EXPECT_THROW(reg.add("c", a, true), std::invalid_argument);
    EXPECT_EQ(reg.frozen().size(), 1u);
    EXPECT_EQ(reg.trainable().size(), 1u);
}

TEST(FrozenBackbone, EveryTensorRegisteredOnceAndFrozen) {
    BackboneConfig cfg;
    const auto bb = FrozenBackbone::random(cfg, 1);
    FreezeRegistry reg;
    bb.register_into(reg);
    EXPECT_EQ(reg.size(), 3u + cfg.layers * 12u);
    for (const auto& e : reg.entries()) {
        EXPECT_TRUE(e.frozen) << e.name;
        EXPECT_FALSE(e.tensor.requires_grad()) << e.name;
    }
    EXPECT_NE(reg.find("backbone.layer1.mlp.w2"), nullptr);
}

TEST(FrozenBackbone, SeededGaussianInit) {
    BackboneConfig cfg;
    cfg.width = 64;
    const auto bb = FrozenBackbone::random(cfg, 3);
    const auto v = bb.layers[0].wq.data();
    double s = 0.0, s2 = 0.0;
    for (double x : v) {
        s += x;
        s2 += x * x;
    }
    const double n = static_cast<double>(v.size());
    EXPECT_NEAR(s / n, 0.0, 0.002);
    EXPECT_NEAR(std::sqrt(s2 / n), 0.02, 0.002);
    for (double g : bb.layers[0].ln1_gamma.data()) EXPECT_EQ(g, 1.0);
    for (double b : bb.layers[0].mlp_b1.data()) EXPECT_EQ(b, 0.0);
    const auto again = FrozenBackbone::random(cfg, 3);
    EXPECT_TRUE(std::equal(v.begin(), v.end(), again.layers[0].wq.data().begin()));
}

TEST(BackboneConfig, ValidationNamesField) {
    BackboneConfig cfg;
    cfg.width = 0;
    try {
        cfg.validate();
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_EQ(std::string(e.what()).rfind("d ", 0), 0u) << e.what();
    }
    cfg.width = 30;
    cfg.heads = 4;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(FrozenLayer, ResidualComposition) {
    const auto w = random_layer(4, 2, 11);
    const Tensor x = uniform_tensor({3, 4}, 11, "x");
    const Tensor y = add(x, mha(x, w));
    EXPECT_LT(max_abs_diff(frozen_layer_forward(x, w).data(), add(y, mlp(y, w)).data()), 1e-15);
}

}  // namespace
}  // namespace lavish
