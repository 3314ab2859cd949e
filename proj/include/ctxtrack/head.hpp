// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "ctxtrack/nn.hpp"

namespace ctxtrack {

/// Normalized box: top-left corner plus size, all in [0, 1] frame units.
struct BBox {
    double x = 0;
    double y = 0;
    double w = 0;
    double h = 0;

    double cx() const { return x + w / 2; }
    double cy() const { return y + h / 2; }
    bool operator==(const BBox&) const = default;
};

struct HeadOutput {
    Tensor cls;     // (rows, cols), sigmoid scores
    Tensor offset;  // (2, rows, cols): x then y sub-cell offset
    Tensor size;    // (2, rows, cols): w then h, normalized
    int rows = 0;
    int cols = 0;
};

struct HeadConfig {
    int in_dim = 64;
    int hidden = 32;
    int depth = 3;  // conv-bn-relu blocks per branch
};

/// Fully convolutional center head: three branches (class, offset, size),
/// each `depth` x (3x3 conv, batch norm, ReLU) followed by a 1x1 projection
/// and a sigmoid.
class Head {
  public:
    Head(const HeadConfig& cfg, Rng& rng);

    const HeadConfig& config() const { return cfg_; }

    /// tokens: (rows*cols, in_dim). Training mode uses per-call batch-norm
    /// statistics and updates the running estimates.
    HeadOutput predict(const Tensor& tokens, int rows, int cols, bool training = false) const;

    NamedTensors named_parameters() const;  // trainable tensors only
    NamedTensors named_buffers() const;     // batch-norm running statistics
    std::vector<Tensor> parameters() const;

  private:
    struct Block {
        Tensor conv_w;
        Tensor conv_b;
        Tensor bn_w;
        Tensor bn_b;
        // Mutated only by training-mode forward passes.
        mutable ops::BatchNormStats stats;
    };
    struct Branch {
        std::vector<Block> blocks;
        Tensor out_w;
        Tensor out_b;
    };

    Tensor run_branch(const Branch& b, const Tensor& x, bool training) const;
    Branch make_branch(int out_channels, double out_bias, Rng& rng) const;

    HeadConfig cfg_;
    Branch cls_;
    Branch offset_;
    Branch size_;
};

/// argmax of cls (first in row-major order on ties), read offset and size
/// there, and return the clamped box plus the peak score.
std::pair<BBox, double> decode_box(const HeadOutput& h);

}  // namespace ctxtrack
