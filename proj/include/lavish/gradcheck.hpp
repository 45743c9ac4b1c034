// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "lavish/tensor.hpp"

namespace lavish {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate
// of x. f receives perturbed copies; x itself is not modified.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

// Same estimate for a parameter that f reads by reference: each coordinate of
// param is perturbed in place and restored bitwise before returning.
Tensor finite_diff_grad_inplace(const std::function<double()>& f, Tensor& param, double h = 1e-5);

// ||a - b|| / max(||a||, ||b||), and 0 when both are exactly zero.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace lavish
