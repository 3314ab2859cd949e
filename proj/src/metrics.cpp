// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctxtrack {

double iou(const BBox& a, const BBox& b) {
    if (!(a.w > 0 && a.h > 0 && b.w > 0 && b.h > 0)) return 0.0;
    const double ax2 = a.x + a.w, ay2 = a.y + a.h, bx2 = b.x + b.w, by2 = b.y + b.h;
    const double iw = std::min(ax2, bx2) - std::max(a.x, b.x);
    const double ih = std::min(ay2, by2) - std::max(a.y, b.y);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    // Areas from the same corner differences, so equal boxes score exactly 1.
    const double area_a = (ax2 - a.x) * (ay2 - a.y), area_b = (bx2 - b.x) * (by2 - b.y);
    return inter / (area_a + area_b - inter);
}

std::array<double, kSuccessThresholds> success_curve(std::span<const double> ious) {
    std::array<double, kSuccessThresholds> curve{};
    if (ious.empty()) return curve;
    for (int k = 0; k < kSuccessThresholds; ++k) {
        const double tau = 0.05 * k;
        // The final threshold counts exact overlaps.
        const bool last = k == kSuccessThresholds - 1;
        const auto hits =
            std::count_if(ious.begin(), ious.end(), [&](double v) { return last ? v >= 1.0 : v > tau; });
        curve[static_cast<std::size_t>(k)] = static_cast<double>(hits) / static_cast<double>(ious.size());
    }
    return curve;
}

MetricReport compute_metrics(std::span<const BBox> pred, std::span<const BBox> gt, double fps) {
    if (pred.size() != gt.size()) {
        throw std::invalid_argument("compute_metrics: " + std::to_string(pred.size()) + " predictions for " +
                                    std::to_string(gt.size()) + " ground-truth boxes");
    }
    if (pred.empty()) throw std::invalid_argument("compute_metrics: no frames");
    std::vector<double> ious(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) ious[i] = iou(pred[i], gt[i]);

    MetricReport r;
    r.frames = static_cast<int>(ious.size());
    const double n = static_cast<double>(ious.size());
    for (double v : ious) {
        r.ao += v;
        r.sr50 += v > 0.5 ? 1 : 0;
        r.sr75 += v > 0.75 ? 1 : 0;
    }
    r.ao /= n;
    r.sr50 /= n;
    r.sr75 /= n;
    const auto curve = success_curve(ious);
    for (double s : curve) r.auc += s;
    r.auc /= kSuccessThresholds;
    r.fps = fps;
    return r;
}

MetricReport merge_reports(std::span<const MetricReport> reports) {
    MetricReport out;
    double fps_weight = 0;
    for (const auto& r : reports) {
        const double w = r.frames;
        out.ao += r.ao * w;
        out.sr50 += r.sr50 * w;
        out.sr75 += r.sr75 * w;
        out.auc += r.auc * w;
        if (r.fps > 0) {
            out.fps += r.fps * w;
            fps_weight += w;
        }
        out.frames += r.frames;
    }
    if (out.frames > 0) {
        out.ao /= out.frames;
        out.sr50 /= out.frames;
        out.sr75 /= out.frames;
        out.auc /= out.frames;
    }
    if (fps_weight > 0) out.fps /= fps_weight;
    return out;
}

}  // namespace ctxtrack
