// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/optim.hpp"

#include <cmath>

namespace ctxtrack {

AdamWState AdamWState::create(std::span<const Tensor> params, std::span<const double> lrs, AdamWHyper hyper) {
    if (params.size() != lrs.size()) throw ShapeError("adamw: one learning rate per parameter required");
    AdamWState s;
    s.hyper = hyper;
    s.lr.assign(lrs.begin(), lrs.end());
    for (const auto& p : params) {
        s.m.emplace_back(static_cast<std::size_t>(p.numel()), Scalar(0));
        s.v.emplace_back(static_cast<std::size_t>(p.numel()), Scalar(0));
    }
    return s;
}

void adamw_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamWState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adamw_step: parameter/gradient/state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != grads[i].shape() ||
            static_cast<std::size_t>(params[i].numel()) != state.m[i].size()) {
            throw ShapeError("adamw_step: shape mismatch for parameter " + std::to_string(i));
        }
    }
    for (double lr : state.lr) {
        if (!(lr >= 0)) throw ConfigError("adamw_step: learning rate must be non-negative");
    }
    const auto& h = state.hyper;
    ++state.step;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].data();
        auto g = grads[i].data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        const double lr = state.lr[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g[j];
            const double mj = h.beta1 * m[j] + (1.0 - h.beta1) * gj;
            const double vj = h.beta2 * v[j] + (1.0 - h.beta2) * gj * gj;
            m[j] = static_cast<Scalar>(mj);
            v[j] = static_cast<Scalar>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            double pj = p[j];
            pj -= lr * h.weight_decay * pj;
            pj -= lr * mhat / (std::sqrt(vhat) + h.eps);
            p[j] = static_cast<Scalar>(pj);
        }
    }
}

void adamw_step(std::span<Tensor> params, AdamWState& state) {
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.push_back(p.grad());
    adamw_step(params, grads, state);
}

}  // namespace ctxtrack
