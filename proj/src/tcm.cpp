// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/tcm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ctxtrack {

void ReferenceBank::check_invariants() const {
    const auto n = static_cast<std::size_t>(size());
    if (importance.size() != n) throw std::logic_error("bank: importance length differs from token count");
    if (tokens.rank() != 2 || tokens.dim(0) != static_cast<std::int64_t>(n)) {
        throw std::logic_error("bank: token tensor has shape " + shape_str(tokens.shape()) + " for " +
                               std::to_string(n) + " tokens");
    }
    if (capacity_max > 0 && size() > capacity_max) throw std::logic_error("bank: capacity exceeded");
    for (float w : importance) {
        if (!std::isfinite(w) || w < 0.0f) throw std::logic_error("bank: importance must be finite and non-negative");
    }
}

std::vector<float> importance_delta(const CrossAttention& attention, std::span<const float> cls) {
    if (static_cast<int>(cls.size()) != attention.ns) {
        throw ShapeError("accumulate_importance: " + std::to_string(cls.size()) + " class scores for " +
                         std::to_string(attention.ns) + " search tokens");
    }
    const std::size_t expected =
        static_cast<std::size_t>(attention.layers) * attention.heads * attention.ns * attention.nr;
    if (attention.values.size() != expected) throw ShapeError("accumulate_importance: attention tensor size mismatch");
    for (float c : cls) {
        if (!(c >= 0.0f && c <= 1.0f)) throw std::domain_error("accumulate_importance: class score outside [0, 1]");
    }
    const int nr = attention.nr;
    std::vector<double> delta(static_cast<std::size_t>(nr), 0.0);
    std::vector<double> layer_sum(static_cast<std::size_t>(nr));
    for (int j = 0; j < attention.layers; ++j) {
        std::fill(layer_sum.begin(), layer_sum.end(), 0.0);
        for (int m = 0; m < attention.heads; ++m) {
            for (int s = 0; s < attention.ns; ++s) {
                const double c = cls[static_cast<std::size_t>(s)];
                if (c == 0.0) continue;
                for (int i = 0; i < nr; ++i) layer_sum[static_cast<std::size_t>(i)] += attention.at(j, m, s, i) * c;
            }
        }
        for (int i = 0; i < nr; ++i) delta[static_cast<std::size_t>(i)] += layer_sum[static_cast<std::size_t>(i)] / attention.heads;
    }
    return {delta.begin(), delta.end()};
}

void accumulate_importance(ReferenceBank& bank, const CrossAttention& attention, std::span<const float> cls) {
    if (attention.nr != bank.size()) {
        throw ShapeError("accumulate_importance: attention has " + std::to_string(attention.nr) +
                         " reference columns, bank has " + std::to_string(bank.size()));
    }
    const auto delta = importance_delta(attention, cls);
    for (std::size_t i = 0; i < delta.size(); ++i) bank.importance[i] += delta[i];
}

std::vector<std::int64_t> topk_indices(std::span<const float> importance, std::span<const Provenance> provenance,
                                       int k) {
    const int n = static_cast<int>(importance.size());
    if (provenance.size() != importance.size()) throw ShapeError("collect_topk: provenance length mismatch");
    if (k < 1 || k > n) {
        throw std::out_of_range("collect_topk: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](std::int64_t a, std::int64_t b) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        if (importance[ua] != importance[ub]) return importance[ua] > importance[ub];
        const auto& pa = provenance[ua];
        const auto& pb = provenance[ub];
        if (pa.source_frame != pb.source_frame) return pa.source_frame > pb.source_frame;
        if (pa.cell.row != pb.cell.row) return pa.cell.row < pb.cell.row;
        if (pa.cell.col != pb.cell.col) return pa.cell.col < pb.cell.col;
        return a < b;
    };
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), better);
    order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());
    return order;
}

void collect_topk(ReferenceBank& bank, int k) {
    const auto keep = topk_indices(bank.importance, bank.provenance, k);
    std::vector<float> importance;
    std::vector<Provenance> provenance;
    importance.reserve(keep.size());
    provenance.reserve(keep.size());
    for (auto i : keep) {
        importance.push_back(bank.importance[static_cast<std::size_t>(i)]);
        provenance.push_back(bank.provenance[static_cast<std::size_t>(i)]);
    }
    bank.tokens = ops::gather_rows(bank.tokens, keep);
    bank.importance = std::move(importance);
    bank.provenance = std::move(provenance);
}

Tensor integrate(const Tensor& search, const Tensor& cls, const ClassEmbeddings& embeds) {
    if (search.rank() != 2) throw ShapeError("integrate: search tokens must be rank 2");
    const std::int64_t ns = search.dim(0), d = search.dim(1);
    if (cls.numel() != ns) throw ShapeError("integrate: one class score per search token required");
    if (embeds.target.numel() != d || embeds.background.numel() != d) {
        throw ShapeError("integrate: class embedding dim mismatch");
    }
    for (Scalar c : cls.data()) {
        if (!(c >= 0 && c <= 1)) throw std::domain_error("integrate: class score outside [0, 1]");
    }
    const Tensor c = ops::reshape(cls, {ns, 1});
    const Tensor target = ops::matmul(c, ops::reshape(embeds.target, {1, d}));
    const Tensor background = ops::matmul(ops::rsub_scalar(c, Scalar(1)), ops::reshape(embeds.background, {1, d}));
    return ops::add(search, ops::add(target, background));
}

void update_bank(ReferenceBank& bank, const Tensor& tokens, int frame_id, const PatchGrid& grid) {
    const int ns = tokens.rank() == 2 ? static_cast<int>(tokens.dim(0)) : -1;
    if (ns < 0 || static_cast<std::size_t>(ns) != grid.cells.size()) {
        throw ShapeError("update_bank: token count does not match the patch grid");
    }
    if (ns == 0) return;
    if (bank.size() > 0 && tokens.dim(1) != bank.tokens.dim(1)) throw ShapeError("update_bank: token dim mismatch");
    if (bank.size() + ns > bank.capacity_max && bank.size() > 0) {
        collect_topk(bank, std::min(bank.target_len, bank.size()));
    }
    if (bank.size() == 0) {
        bank.tokens = tokens;
    } else {
        const std::vector<Tensor> parts{bank.tokens, tokens};
        bank.tokens = ops::concat_rows(parts);
    }
    bank.importance.insert(bank.importance.end(), static_cast<std::size_t>(ns), 0.0f);
    for (const auto& cell : grid.cells) bank.provenance.push_back({frame_id, cell});
}

void reset_importance(ReferenceBank& bank) {
    std::fill(bank.importance.begin(), bank.importance.end(), 0.0f);
    bank.frames_since_reset = 0;
}

}  // namespace ctxtrack
