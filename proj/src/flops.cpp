// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/flops.hpp"

#include <stdexcept>

namespace ctxtrack {

AttentionCost attention_flops(std::int64_t ns, std::int64_t nr, std::int64_t dim, std::int64_t layers,
                              std::int64_t heads, AttentionMode mode, std::int64_t mlp_ratio) {
    if (ns <= 0 || dim <= 0 || layers <= 0 || heads <= 0 || mlp_ratio <= 0 || nr < 0) {
        throw std::invalid_argument("attention_flops: sizes must be positive (Nr may be zero)");
    }
    if (dim % heads != 0) throw std::invalid_argument("attention_flops: heads must divide dim");
    const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v); };
    const std::uint64_t n = u(ns + nr), d = u(dim), L = u(layers), d2 = d * d;

    AttentionCost c;
    if (mode == AttentionMode::Unidirectional) {
        // Queries, output projection and MLP run on search rows only; keys
        // and values are needed for every token.
        c.attention = 2 * u(ns) * n * d * L;
        c.projection = (2 * u(ns) * d2 + 2 * n * d2) * L;
        c.mlp = 2 * u(ns) * u(mlp_ratio) * d2 * L;
    } else {
        c.attention = 2 * n * n * d * L;
        c.projection = 4 * n * d2 * L;
        c.mlp = 2 * n * u(mlp_ratio) * d2 * L;
    }
    return c;
}

}  // namespace ctxtrack
