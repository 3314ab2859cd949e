// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctxtrack/encoder.hpp"

// Token context memory: scores reference tokens by how much classification
// mass they attract, keeps the best ones, and appends each frame's
// class-aware search tokens.
namespace ctxtrack {

struct Provenance {
    int source_frame = 0;
    Cell cell;
    bool operator==(const Provenance&) const = default;
};

struct ReferenceBank {
    Tensor tokens;                      // (Nr, dim)
    std::vector<float> importance;      // Nr accumulators, >= 0
    std::vector<Provenance> provenance;
    int capacity_max = 0;
    int target_len = 0;
    int frames_since_reset = 0;

    int size() const { return static_cast<int>(provenance.size()); }
    /// Throws std::logic_error if a structural invariant is broken.
    void check_invariants() const;
};

struct ClassEmbeddings {
    Tensor target;      // (dim)
    Tensor background;  // (dim)
};

/// Per-reference importance increment:
///   delta[i] = sum_layers mean_heads sum_s A[layer][head][s][i] * cls[s]
std::vector<float> importance_delta(const CrossAttention& attention, std::span<const float> cls);

/// W += importance_delta(attention, cls). cls must lie in [0, 1].
void accumulate_importance(ReferenceBank& bank, const CrossAttention& attention, std::span<const float> cls);

/// Indices (ascending) of the k tokens with the largest importance. Ties go to
/// the more recent source frame, then to the smaller (row, col) cell, then to
/// the smaller index.
std::vector<std::int64_t> topk_indices(std::span<const float> importance, std::span<const Provenance> provenance,
                                       int k);

/// Keeps exactly k tokens (see topk_indices), preserving their relative order.
void collect_topk(ReferenceBank& bank, int k);

/// S' = S + C * E_target + (1 - C) * E_background, row by row. `cls` is (Ns).
Tensor integrate(const Tensor& search, const Tensor& cls, const ClassEmbeddings& embeds);

/// Prunes to target_len when appending would exceed capacity, then appends
/// `tokens` with zero importance and the given provenance.
void update_bank(ReferenceBank& bank, const Tensor& tokens, int frame_id, const PatchGrid& grid);

void reset_importance(ReferenceBank& bank);

}  // namespace ctxtrack
