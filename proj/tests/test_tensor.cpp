// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lavish/op_counter.hpp"
#include "test_util.hpp"

namespace lavish {
namespace {

using testing::max_abs_diff;
using testing::naive_matmul;
using testing::uniform_tensor;
using testing::worst_grad_error;

TEST(Tensor, ShapeMustMatchData) {
    EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), std::invalid_argument);
    EXPECT_THROW(Tensor::zeros({2, 0}), std::invalid_argument);
    EXPECT_THROW(Tensor::zeros({}), std::invalid_argument);
    const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.at(1, 2), 6.0);
}

TEST(Tensor, OnlyLeavesAreMutable) {
    Tensor a = Tensor::zeros({2, 2}, true);
    Tensor b = add(a, a);
    EXPECT_NO_THROW(a.mutable_data()[0] = 1.0);
    EXPECT_THROW(b.mutable_data(), std::logic_error);
}

TEST(Matmul, IdentityAndProjector) {
    const Tensor i2 = Tensor::matrix({{1, 0}, {0, 1}});
    const Tensor b = Tensor::matrix({{1, 2}, {3, 4}});
    const Tensor ib = matmul(i2, b);
    EXPECT_EQ(std::vector<double>(ib.data().begin(), ib.data().end()), (std::vector<double>{1, 2, 3, 4}));
    const Tensor p = Tensor::matrix({{1, 0}, {0, 0}});
    const Tensor c = Tensor::matrix({{5, 6}, {7, 8}});
    const Tensor r = matmul(p, c);
    EXPECT_EQ(std::vector<double>(r.data().begin(), r.data().end()), (std::vector<double>{5, 6, 0, 0}));
}

TEST(Matmul, MatchesTripleLoop) {
    const Tensor a = uniform_tensor({3, 4}, 1, "a");
    const Tensor b = uniform_tensor({4, 2}, 1, "b");
    EXPECT_LT(max_abs_diff(matmul(a, b).data(), naive_matmul(a.data(), b.data(), 3, 4, 2)), 1e-12);
}

TEST(Matmul, MismatchNamesBothShapes) {
    try {
        matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
        FAIL() << "expected a shape error";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
    }
}

TEST(Matmul, RecordsMacs) {
    OpRecorder rec;
    {
        OpScope s("probe");
        matmul(Tensor::zeros({3, 4}), Tensor::zeros({4, 5}));
    }
    EXPECT_EQ(rec.by_label().at("probe").macs, 60u);
}

TEST(Softmax, UniformAndStable) {
    const Tensor u = softmax_rows(Tensor::matrix({{0, 0, 0}}));
    for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    const Tensor s = softmax_rows(Tensor::matrix({{1000, 0}}));
    EXPECT_NEAR(s.at(0), 1.0, 1e-12);
    EXPECT_NEAR(s.at(1), 0.0, 1e-12);
}

TEST(Softmax, MatchesScalarOracle) {
    const Tensor x = uniform_tensor({2, 5}, 2, "x", -3, 3);
    const Tensor y = softmax_rows(x);
    for (std::size_t i = 0; i < 2; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < 5; ++j) z += std::exp(x.at(i, j));
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(y.at(i, j), std::exp(x.at(i, j)) / z, 1e-12);
    }
}

TEST(Softmax, RowsSumToOneProperty) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed, "shape");
        const std::size_t p = 1 + rng.next_u64() % 6, q = 1 + rng.next_u64() % 9;
        const double scale = std::pow(10.0, rng.uniform(-3, 3));
        const Tensor y = softmax_rows(uniform_tensor({p, q}, seed, "x", -scale, scale));
        for (std::size_t i = 0; i < p; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
                EXPECT_GE(y.at(i, j), 0.0);
                s += y.at(i, j);
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Softmax, RejectsNonFinite) {
    EXPECT_THROW(softmax_rows(Tensor::matrix({{1, std::numeric_limits<double>::infinity()}})), std::domain_error);
    EXPECT_THROW(softmax_rows(Tensor::matrix({{std::nan(""), 0}})), std::domain_error);
}

TEST(Backward, QuadraticForm) {
    Tensor x = Tensor::from({3}, {1, 2, 3}, true);
    backward(sum(mul(x, x)));
    EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4, 6}));
}

TEST(Backward, SoftmaxSumIsConstant) {
    Tensor x = uniform_tensor({3, 4}, 3, "x", -1, 1, true);
    backward(sum(softmax_rows(x)));
    for (double g : x.grad()) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Backward, CompositeMatchesFiniteDifferences) {
    Tensor a = uniform_tensor({3, 3}, 4, "a", -1, 1, true);
    Tensor b = uniform_tensor({3, 3}, 4, "b", -1, 1, true);
    const Tensor w = uniform_tensor({3, 3}, 4, "w");
    auto loss = [&] { return sum(mul(softmax_rows(matmul(a, b)), w)); };
    EXPECT_LT(worst_grad_error(loss, {a, b}), 1e-7);
}

TEST(Backward, RejectsNonScalarAndDoubleBackward) {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    EXPECT_THROW(backward(mul(x, x)), std::invalid_argument);
    EXPECT_THROW(backward(Tensor::scalar(1.0)), std::invalid_argument);
    backward(sum(mul(x, x)));
    EXPECT_THROW(backward(sum(mul(x, x))), std::logic_error);
    x.zero_grad();
    EXPECT_NO_THROW(backward(sum(mul(x, x))));
}

TEST(Backward, SharedSubexpressionAccumulates) {
    Tensor x = Tensor::from({1}, {3}, true);
    const Tensor y = mul(x, x);
    backward(sum(add(y, y)));  // 2 x^2
    EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(NoGrad, SuppressesHistory) {
    Tensor x = Tensor::from({1}, {3}, true);
    {
        NoGradGuard g;
        EXPECT_FALSE(mul(x, x).requires_grad());
    }
    EXPECT_TRUE(mul(x, x).requires_grad());
}

TEST(FiniteDiff, Basics) {
    const Tensor x = Tensor::from({1}, {3});
    const Tensor g = finite_diff_grad([](const Tensor& t) { return t.at(0) * t.at(0); }, x, 1e-5);
    EXPECT_NEAR(g.at(0), 6.0, 1e-9);
    const Tensor z = finite_diff_grad([](const Tensor&) { return 4.0; }, Tensor::from({3}, {1, 2, 3}));
    for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(RelativeError, Definition) {
    const std::vector<double> a{3, 4}, b{3, 4}, c{0, 0};
    EXPECT_EQ(relative_error(a, b), 0.0);
    EXPECT_EQ(relative_error(c, c), 0.0);
    EXPECT_DOUBLE_EQ(relative_error(a, c), 1.0);
}

// Each primitive's analytic gradient against central differences on [-1, 1].
TEST(GradCheck, EveryPrimitive) {
    Tensor a = uniform_tensor({3, 4}, 10, "a", -1, 1, true);
    Tensor b = uniform_tensor({3, 4}, 10, "b", -1, 1, true);
    Tensor c = uniform_tensor({4, 2}, 10, "c", -1, 1, true);
    Tensor row = uniform_tensor({4}, 10, "row", -1, 1, true);
    Tensor g = uniform_tensor({1}, 10, "g", -1, 1, true);
    Tensor gamma = uniform_tensor({4}, 10, "gamma", 0.5, 1.5, true);
    Tensor beta = uniform_tensor({4}, 10, "beta", -1, 1, true);
    Tensor gw = uniform_tensor({2, 2, 3}, 10, "gw", -1, 1, true);
    const Tensor w34 = uniform_tensor({3, 4}, 10, "w34");
    const Tensor w36 = uniform_tensor({3, 6}, 10, "w36");
    const Tensor w43 = uniform_tensor({4, 3}, 10, "w43");
    auto weighted = [](const Tensor& t, const Tensor& w) { return sum(mul(t, w)); };
    const std::vector<int> labels{1, 0, 3};

    const double tol = 1e-6;
    EXPECT_LT(worst_grad_error([&] { return weighted(matmul(a, c), uniform_tensor({3, 2}, 1, "m")); }, {a, c}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(transpose(a), w43); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(add(a, b), w34); }, {a, b}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(sub(a, b), w34); }, {a, b}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(mul(a, b), w34); }, {a, b}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(scale(a, -1.7), w34); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(mul_scalar(a, g), w34); }, {a, g}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(add_row_bias(a, row), w34); }, {a, row}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(concat_rows({a, b}), concat_rows({w34, w34})); }, {a, b}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(concat_cols({a, b}), concat_cols({w34, w34})); }, {a, b}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(slice_cols(a, 1, 2), slice_cols(w34, 0, 2)); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(slice_rows(a, 1, 2), slice_rows(w34, 0, 2)); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return mean(mul(a, w34)); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(mean_rows(a), Tensor::from({1, 4}, {1, -2, 3, 0.5})); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(softmax_rows(a), w34); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(gelu(a), w34); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(relu(a), w34); }, {a}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(layer_norm(a, gamma, beta), w34); }, {a, gamma, beta}), tol);
    EXPECT_LT(worst_grad_error([&] { return weighted(grouped_linear(a, gw), w36); }, {a, gw}), tol);
    EXPECT_LT(worst_grad_error([&] { return cross_entropy(a, labels); }, {a}), tol);
}

TEST(Gelu, TanhApproximationConstants) {
    const Tensor x = Tensor::from({3}, {-1.5, 0.0, 0.7});
    const Tensor y = gelu(x);
    for (std::size_t i = 0; i < 3; ++i) {
        const double v = x.at(i);
        const double ref = 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
        EXPECT_NEAR(y.at(i), ref, 1e-15);
    }
}

TEST(LayerNorm, MatchesOracle) {
    const Tensor x = uniform_tensor({2, 5}, 5, "x");
    const Tensor gamma = uniform_tensor({5}, 5, "gamma");
    const Tensor beta = uniform_tensor({5}, 5, "beta");
    const Tensor y = layer_norm(x, gamma, beta);
    for (std::size_t i = 0; i < 2; ++i) {
        double mu = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 5; ++j) mu += x.at(i, j) / 5.0;
        for (std::size_t j = 0; j < 5; ++j) var += (x.at(i, j) - mu) * (x.at(i, j) - mu) / 5.0;
        for (std::size_t j = 0; j < 5; ++j) {
            EXPECT_NEAR(y.at(i, j), (x.at(i, j) - mu) / std::sqrt(var + 1e-5) * gamma.at(j) + beta.at(j), 1e-12);
        }
    }
}

TEST(GroupedLinear, MatchesBlockDiagonalOracle) {
    const std::size_t G = 2, in_g = 3, out_g = 2;
    const Tensor x = uniform_tensor({4, G * in_g}, 6, "x");
    const Tensor w = uniform_tensor({G, in_g, out_g}, 6, "w");
    std::vector<double> dense(G * in_g * G * out_g, 0.0);
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t i = 0; i < in_g; ++i)
            for (std::size_t o = 0; o < out_g; ++o)
                dense[(g * in_g + i) * (G * out_g) + g * out_g + o] = w.data()[(g * in_g + i) * out_g + o];
    EXPECT_LT(max_abs_diff(grouped_linear(x, w).data(), naive_matmul(x.data(), dense, 4, G * in_g, G * out_g)), 1e-12);
}

TEST(CrossEntropy, MatchesOracle) {
    const Tensor logits = Tensor::matrix({{2.0, -1.0}, {0.5, 0.5}});
    const std::vector<int> labels{0, 1};
    const double l0 = -std::log(std::exp(2.0) / (std::exp(2.0) + std::exp(-1.0)));
    const double l1 = std::log(2.0);
    EXPECT_NEAR(cross_entropy(logits, labels).item(), (l0 + l1) / 2.0, 1e-14);
    const std::vector<int> bad{0, 2};
    EXPECT_THROW(cross_entropy(logits, bad), std::invalid_argument);
}

TEST(Determinism, RepeatedOpsAreBitwiseEqual) {
    const Tensor a = uniform_tensor({5, 7}, 9, "a");
    const Tensor b = uniform_tensor({7, 3}, 9, "b");
    const Tensor y1 = softmax_rows(matmul(a, b));
    const Tensor y2 = softmax_rows(matmul(a, b));
    EXPECT_TRUE(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}

TEST(Rng, SeedDeterministicAndStreamSeparated) {
    Rng a(42, "x"), b(42, "x"), c(42, "y"), d(43, "x");
    bool differs_stream = false, differs_seed = false;
    for (int i = 0; i < 16; ++i) {
        const auto va = a.next_u64(), vc = c.next_u64(), vd = d.next_u64();
        EXPECT_EQ(va, b.next_u64());
        differs_stream |= va != vc;
        differs_seed |= va != vd;
    }
    EXPECT_TRUE(differs_stream);
    EXPECT_TRUE(differs_seed);
}

TEST(Rng, UniformAndNormalMoments) {
    Rng r(7, 0);
    double s = 0.0, s2 = 0.0, u = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
        const double x = r.uniform();
        ASSERT_GE(x, 0.0);
        ASSERT_LT(x, 1.0);
        u += x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.03);
    EXPECT_NEAR(s2 / n, 1.0, 0.05);
    EXPECT_NEAR(u / n, 0.5, 0.01);
}

TEST(Rng, Fnv1aKnownValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace lavish
