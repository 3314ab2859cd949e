// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/nn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace ctxtrack::nn {

Tensor parameter(Shape shape, Scalar fill) {
    Tensor t(std::move(shape), fill);
    t.set_requires_grad(true);
    return t;
}

Tensor normal_parameter(Shape shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<Scalar>(stddev * rng.normal());
    t.set_requires_grad(true);
    return t;
}

Linear Linear::create(std::int64_t in, std::int64_t out, Rng& rng) {
    const double xavier = std::sqrt(2.0 / static_cast<double>(in + out));
    return Linear{normal_parameter({in, out}, xavier, rng), parameter({out})};
}

void Linear::collect(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

LayerNorm LayerNorm::create(std::int64_t dim) { return LayerNorm{parameter({dim}, Scalar(1)), parameter({dim})}; }

void LayerNorm::collect(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

void assign_by_name(const NamedTensors& dst, const NamedTensors& src) {
    std::unordered_map<std::string, const Tensor*> lookup;
    for (const auto& [name, t] : src) lookup.emplace(name, &t);
    for (const auto& [name, t] : dst) {
        auto it = lookup.find(name);
        if (it == lookup.end()) throw IoError("checkpoint is missing tensor " + name);
        if (it->second->shape() != t.shape()) {
            throw IoError("checkpoint tensor " + name + " has shape " + shape_str(it->second->shape()) + ", expected " +
                          shape_str(t.shape()));
        }
        Tensor handle = t;
        std::copy(it->second->data().begin(), it->second->data().end(), handle.data().begin());
    }
}

}  // namespace ctxtrack::nn
