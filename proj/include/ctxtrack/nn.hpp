// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "ctxtrack/checkpoint.hpp"
#include "ctxtrack/ops.hpp"
#include "ctxtrack/rng.hpp"

// Small parameter containers shared by the encoder and the head.
namespace ctxtrack::nn {

Tensor parameter(Shape shape, Scalar fill = Scalar(0));
Tensor normal_parameter(Shape shape, double stddev, Rng& rng);

struct Linear {
    Tensor weight;  // (in, out)
    Tensor bias;    // (out)

    static Linear create(std::int64_t in, std::int64_t out, Rng& rng);
    Tensor operator()(const Tensor& x) const { return ops::add(ops::matmul(x, weight), bias); }
    void collect(NamedTensors& out, const std::string& prefix) const;
};

struct LayerNorm {
    Tensor weight;
    Tensor bias;

    static LayerNorm create(std::int64_t dim);
    Tensor operator()(const Tensor& x) const { return ops::layer_norm(x, weight, bias); }
    void collect(NamedTensors& out, const std::string& prefix) const;
};

/// Copies values of `src` entries into same-named entries of `dst`.
/// Throws IoError on missing names or shape mismatches.
void assign_by_name(const NamedTensors& dst, const NamedTensors& src);

}  // namespace ctxtrack::nn
