// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "ctxtrack/head.hpp"

namespace ctxtrack {

inline constexpr double kFocalAlpha = 2.0;
inline constexpr double kFocalBeta = 4.0;
inline constexpr double kProbEps = 1e-6;

struct LossWeights {
    double iou = 2.0;
    double l1 = 5.0;
};

struct LossTerms {
    Tensor total;
    Tensor focal;
    Tensor giou;
    Tensor l1;
};

/// Gaussian bump centered on the cell containing the box center; exactly that
/// cell equals 1. sigma = radius / 3, radius = max(1, min(w, h) in cells / 2).
std::vector<Scalar> gaussian_target(const BBox& gt, int rows, int cols);

/// Penalty-reduced pixelwise focal loss normalized by the number of cells
/// whose target equals 1. Probabilities are clamped to [eps, 1 - eps].
Tensor focal_loss(const Tensor& cls, const std::vector<Scalar>& target);

/// 1 - GIoU for a predicted (x, y, w, h) tensor of shape (4) against a fixed
/// ground-truth box. Throws std::domain_error on zero-area boxes.
Tensor giou_loss(const Tensor& pred, const BBox& gt);

/// Non-differentiable GIoU for plain boxes.
double giou(const BBox& a, const BBox& b);

/// Classification, GIoU and L1 terms. Regression is read at the cell holding
/// the ground-truth center.
LossTerms total_loss(const HeadOutput& head, const BBox& gt, const LossWeights& weights = {});

}  // namespace ctxtrack
