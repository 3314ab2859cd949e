// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>

#include "ctxtrack/rng.hpp"
#include "ctxtrack/tensor.hpp"

namespace ctxtrack::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<Scalar>(scale * rng.normal());
    return t;
}

inline Tensor random_uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<Scalar>(rng.uniform(lo, hi));
    return t;
}

inline double max_abs_diff(std::span<const Scalar> a, std::span<const Scalar> b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

}  // namespace ctxtrack::testing
