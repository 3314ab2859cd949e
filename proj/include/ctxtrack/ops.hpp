// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctxtrack/tensor.hpp"

// Differentiable primitives. Every op records a backward closure on the active
// tape when any input requires grad. Shapes are row-major; "broadcast" means the
// second operand's shape is a suffix of the first's (leading dims only).
namespace ctxtrack::ops {

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)x(k,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (m,k)x(n,k)^T
Tensor transpose(const Tensor& a);                   // rank 2
Tensor reshape(const Tensor& a, Shape shape);

// ---- structure ----
Tensor concat_rows(std::span<const Tensor> parts);  // along dim 0
Tensor concat_cols(std::span<const Tensor> parts);  // along the last dim of rank-2 tensors
Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end);
Tensor slice_cols(const Tensor& x, std::int64_t begin, std::int64_t end);
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> rows);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, Scalar s);
Tensor mul_scalar(const Tensor& a, Scalar s);
Tensor rsub_scalar(const Tensor& a, Scalar s);  // s - a
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor clamp(const Tensor& a, Scalar lo, Scalar hi);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// ---- reductions ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---- normalization ----
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps = Scalar(1e-5));

struct BatchNormStats {
    Tensor running_mean;
    Tensor running_var;
};

/// x: (C,H,W). Training mode normalizes with per-channel statistics of the
/// input and updates `stats`; eval mode applies the stored statistics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  bool training, Scalar momentum = Scalar(0.1), Scalar eps = Scalar(1e-5));

// ---- convolution ----
/// x: (Cin,H,W), w: (Cout,Cin,k,k) with k in {1,3}, b: (Cout). Stride 1, same padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);

/// Multiply-accumulate tallies for the current thread.
struct MacTally {
    std::int64_t matmul = 0;
    std::int64_t matmul_nt = 0;
    std::int64_t conv = 0;
};
MacTally& mac_tally();

}  // namespace ctxtrack::ops
