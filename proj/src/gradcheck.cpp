// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lavish {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
    std::vector<double> out(x.numel());
    Tensor probe = x.clone();
    auto values = probe.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = f(probe);
        values[i] = saved - h;
        const double down = f(probe);
        values[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return Tensor::from(x.shape(), std::move(out));
}

Tensor finite_diff_grad_inplace(const std::function<double()>& f, Tensor& param, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
    std::vector<double> out(param.numel());
    auto values = param.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = f();
        values[i] = saved - h;
        const double down = f();
        values[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return Tensor::from(param.shape(), std::move(out));
}

double relative_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("relative_error: size mismatch");
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(std::max(na, nb));
    if (denom == 0.0) return 0.0;
    return std::sqrt(diff) / denom;
}

}  // namespace lavish
