// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "ctxtrack/head.hpp"

namespace ctxtrack {

/// Intersection over union; 0 when either box has no area.
double iou(const BBox& a, const BBox& b);

inline constexpr int kSuccessThresholds = 21;

/// Fraction of IoUs strictly above each threshold 0, 0.05, ..., 0.95, then
/// the fraction equal to 1.
std::array<double, kSuccessThresholds> success_curve(std::span<const double> ious);

struct MetricReport {
    double ao = 0;
    double sr50 = 0;
    double sr75 = 0;
    double auc = 0;
    double fps = 0;
    int frames = 0;
};

/// Throws std::invalid_argument if the lists differ in length or are empty.
MetricReport compute_metrics(std::span<const BBox> pred, std::span<const BBox> gt, double fps = 0);

/// Frame-weighted merge of per-sequence reports.
MetricReport merge_reports(std::span<const MetricReport> reports);

}  // namespace ctxtrack
