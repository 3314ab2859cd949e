// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "ctxtrack/encoder.hpp"

namespace ctxtrack {

/// Multiply-accumulate counts for one encoder pass over a frame.
///
/// `attention` covers scores and the weighted value sum. Unidirectional:
/// 2 * Ns * (Nr + Ns) * d per layer. Bidirectional: 2 * (Nr + Ns)^2 * d.
/// `projection` covers the q/k/v/output linears and `mlp` the two MLP
/// linears, both only for the tokens each mode actually processes.
struct AttentionCost {
    std::uint64_t attention = 0;
    std::uint64_t projection = 0;
    std::uint64_t mlp = 0;

    std::uint64_t total() const { return attention + projection + mlp; }
};

/// Heads fold into d and do not change the count; `heads` must divide `dim`.
/// Throws std::invalid_argument on non-positive sizes or a negative Nr.
AttentionCost attention_flops(std::int64_t ns, std::int64_t nr, std::int64_t dim, std::int64_t layers,
                              std::int64_t heads, AttentionMode mode, std::int64_t mlp_ratio = 4);

}  // namespace ctxtrack
