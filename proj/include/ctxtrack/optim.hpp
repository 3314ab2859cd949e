// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctxtrack/tensor.hpp"

namespace ctxtrack {

struct AdamWHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// Moment buffers and step counter for a fixed list of parameters. Each
/// parameter carries its own learning rate so parameter groups are just
/// different entries in `lr`.
struct AdamWState {
    AdamWHyper hyper;
    std::vector<double> lr;
    std::vector<std::vector<Scalar>> m;
    std::vector<std::vector<Scalar>> v;
    std::int64_t step = 0;

    static AdamWState create(std::span<const Tensor> params, std::span<const double> lrs, AdamWHyper hyper = {});
};

/// One decoupled-weight-decay Adam update:
///   p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)
/// `grads[i]` must match `params[i]` in shape; updates happen in place.
void adamw_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamWState& state);

/// Convenience overload taking gradients from each parameter's grad slot.
void adamw_step(std::span<Tensor> params, AdamWState& state);

}  // namespace ctxtrack
