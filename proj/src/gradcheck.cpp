// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ctxtrack {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, Tensor& x, double h) {
    Tensor g(x.shape());
    auto data = x.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Scalar orig = data[i];
        data[i] = static_cast<Scalar>(orig + h);
        const double fp = f(x);
        data[i] = static_cast<Scalar>(orig - h);
        const double fm = f(x);
        data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_difference_gradient: non-finite evaluation at element " + std::to_string(i));
        }
        g.data()[i] = static_cast<Scalar>((fp - fm) / (2.0 * h));
    }
    return g;
}

double relative_error(const Tensor& a, const Tensor& b, double floor) {
    if (a.shape() != b.shape()) throw ShapeError("relative_error: shape mismatch");
    double diff = 0, na = 0, nb = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double x = a.at(i), y = b.at(i);
        diff += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace ctxtrack
