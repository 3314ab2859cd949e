// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "ctxtrack/image.hpp"
#include "ctxtrack/nn.hpp"

namespace ctxtrack {

struct EncoderConfig {
    int search_size = 64;    // px, square search frames
    int template_size = 32;  // px, square template crops
    int patch = 8;           // px
    int dim = 64;
    int layers = 4;
    int heads = 4;
    int mlp_ratio = 4;
    int channels = 3;

    void validate() const;
    int search_grid() const { return search_size / patch; }
    int template_grid() const { return template_size / patch; }
    int search_tokens() const { return search_grid() * search_grid(); }
    int template_tokens() const { return template_grid() * template_grid(); }
    int head_dim() const { return dim / heads; }
};

enum class AttentionMode { Unidirectional, Bidirectional };

struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
};

/// Token index -> grid cell for one patch-embedded frame.
struct PatchGrid {
    int rows = 0;
    int cols = 0;
    std::vector<Cell> cells;
};

struct PatchTokens {
    Tensor tokens;  // (N, dim)
    PatchGrid grid;
};

/// Post-softmax attention from search rows to reference columns, stored per
/// layer and head as f32: values[((layer * heads + head) * ns + s) * nr + r].
struct CrossAttention {
    int layers = 0;
    int heads = 0;
    int ns = 0;
    int nr = 0;
    std::vector<float> values;

    float at(int layer, int head, int s, int r) const {
        return values[((static_cast<std::size_t>(layer) * heads + head) * ns + s) * nr + r];
    }
    bool empty() const { return values.empty(); }
};

struct LayerOutput {
    Tensor search;                    // (Ns, dim)
    Tensor reference;                 // (Nr, dim); unchanged input in unidirectional mode
    std::vector<std::vector<float>> cross_attention;  // per head, Ns x Nr
    std::vector<std::vector<float>> row_mass;         // per head, Ns: sum of the full attention row
};

struct EncodeOutput {
    Tensor search_tokens;  // (Ns, dim)
    PatchGrid grid;
    CrossAttention cross_attention;
    /// Reference tensor fed into each layer (same handle in unidirectional mode).
    std::vector<Tensor> layer_references;
};

struct EncoderLayer {
    nn::LayerNorm ln1;
    nn::Linear q;
    nn::Linear kv;  // (dim, 2*dim): keys then values
    nn::Linear proj;
    nn::LayerNorm ln2;
    nn::Linear fc1;
    nn::Linear fc2;
};

class Encoder {
  public:
    Encoder(const EncoderConfig& cfg, Rng& rng);

    const EncoderConfig& config() const { return cfg_; }

    /// Splits a C x H x W frame into P x P patches, projects them, and adds the
    /// positional embedding of each patch's cell. Smaller frames use the
    /// top-left sub-grid of the positional table.
    PatchTokens patch_embed(const Image& frame) const;

    /// Search queries attend to [reference; search] keys/values; references
    /// are read but never updated.
    LayerOutput unidirectional_layer(int layer, const Tensor& search, const Tensor& reference) const;

    /// Joint self-attention over [reference; search]; both blocks are updated.
    LayerOutput joint_layer(int layer, const Tensor& search, const Tensor& reference) const;

    EncodeOutput encode(const Image& frame, const Tensor& reference,
                        AttentionMode mode = AttentionMode::Unidirectional) const;

    NamedTensors named_parameters() const;
    std::vector<Tensor> parameters() const;

  private:
    LayerOutput attention_block(int layer, const Tensor& search, const Tensor& reference, bool update_reference) const;

    EncoderConfig cfg_;
    nn::Linear patch_embed_;
    Tensor pos_embed_;  // (grid*grid, dim)
    std::vector<EncoderLayer> layers_;
    nn::LayerNorm norm_;
};

/// Empty (0 x dim) reference set.
Tensor empty_reference(int dim);

}  // namespace ctxtrack
