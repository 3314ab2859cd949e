// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "ctxtrack/tensor.hpp"

namespace ctxtrack {

/// Central-difference estimate (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// element of `x`. `x` is perturbed in place and restored before returning.
/// Throws NumericError if any evaluation is non-finite.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, Tensor& x, double h = 1e-5);

/// ||a - b||_2 / max(||a||_2, ||b||_2, floor)
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace ctxtrack
