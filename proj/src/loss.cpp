// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctxtrack {

namespace {

struct CenterCell {
    int row;
    int col;
};

CenterCell center_cell(const BBox& gt, int rows, int cols) {
    const int r = std::clamp(static_cast<int>(std::floor(gt.cy() * rows)), 0, rows - 1);
    const int c = std::clamp(static_cast<int>(std::floor(gt.cx() * cols)), 0, cols - 1);
    return {r, c};
}

void require_valid(const BBox& b, const char* what) {
    if (!(b.w > 0 && b.h > 0) || !std::isfinite(b.x) || !std::isfinite(b.y)) {
        throw std::domain_error(std::string(what) + ": box must have positive area");
    }
}

Tensor constant(Scalar v) { return Tensor::scalar(v); }

}  // namespace

std::vector<Scalar> gaussian_target(const BBox& gt, int rows, int cols) {
    require_valid(gt, "gaussian_target");
    const auto [cr, cc] = center_cell(gt, rows, cols);
    const double radius = std::max(1.0, 0.5 * std::min(gt.w * cols, gt.h * rows));
    const double sigma = radius / 3.0;
    std::vector<Scalar> t(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double d2 = static_cast<double>((r - cr) * (r - cr) + (c - cc) * (c - cc));
            t[static_cast<std::size_t>(r) * cols + c] = static_cast<Scalar>(std::exp(-d2 / (2 * sigma * sigma)));
        }
    return t;
}

Tensor focal_loss(const Tensor& cls, const std::vector<Scalar>& target) {
    const auto n = static_cast<std::size_t>(cls.numel());
    if (target.size() != n) throw ShapeError("focal_loss: target size mismatch");
    std::vector<Scalar> pos(n), neg(n);
    int positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (target[i] == Scalar(1)) {
            pos[i] = 1;
            ++positives;
        } else {
            neg[i] = static_cast<Scalar>(std::pow(1.0 - target[i], kFocalBeta));
        }
    }
    if (positives == 0) throw std::domain_error("focal_loss: target has no positive cell");
    const Shape shape = cls.shape();
    const Tensor p = ops::clamp(cls, static_cast<Scalar>(kProbEps), static_cast<Scalar>(1.0 - kProbEps));
    const Tensor one_minus_p = ops::rsub_scalar(p, Scalar(1));
    // alpha = 2: squares are written as products.
    const Tensor pos_term = ops::mul(ops::mul(ops::mul(one_minus_p, one_minus_p), ops::log(p)), Tensor(shape, pos));
    const Tensor neg_term = ops::mul(ops::mul(ops::mul(p, p), ops::log(one_minus_p)), Tensor(shape, neg));
    return ops::mul_scalar(ops::sum(ops::add(pos_term, neg_term)), Scalar(-1) / static_cast<Scalar>(positives));
}

Tensor giou_loss(const Tensor& pred, const BBox& gt) {
    if (pred.numel() != 4) throw ShapeError("giou_loss: prediction must hold (x, y, w, h)");
    require_valid(gt, "giou_loss");
    for (int i = 2; i < 4; ++i) {
        if (!(pred.at(i) > 0)) throw std::domain_error("giou_loss: predicted box must have positive area");
    }
    const Tensor flat = ops::reshape(pred, {4});
    auto part = [&](std::int64_t i) {
        const std::int64_t idx[] = {i};
        return ops::reshape(ops::gather_rows(flat, idx), {});
    };
    const Tensor px1 = part(0), py1 = part(1), pw = part(2), ph = part(3);
    const Tensor px2 = ops::add(px1, pw), py2 = ops::add(py1, ph);
    const Tensor gx1 = constant(static_cast<Scalar>(gt.x)), gy1 = constant(static_cast<Scalar>(gt.y));
    const Tensor gx2 = constant(static_cast<Scalar>(gt.x + gt.w)), gy2 = constant(static_cast<Scalar>(gt.y + gt.h));

    const Tensor iw = ops::relu(ops::sub(ops::minimum(px2, gx2), ops::maximum(px1, gx1)));
    const Tensor ih = ops::relu(ops::sub(ops::minimum(py2, gy2), ops::maximum(py1, gy1)));
    const Tensor inter = ops::mul(iw, ih);
    const Tensor area_p = ops::mul(pw, ph);
    const Tensor uni = ops::sub(ops::add_scalar(area_p, static_cast<Scalar>(gt.w * gt.h)), inter);
    const Tensor ew = ops::sub(ops::maximum(px2, gx2), ops::minimum(px1, gx1));
    const Tensor eh = ops::sub(ops::maximum(py2, gy2), ops::minimum(py1, gy1));
    const Tensor enclose = ops::mul(ew, eh);
    const Tensor iou = ops::div(inter, uni);
    const Tensor g = ops::sub(iou, ops::div(ops::sub(enclose, uni), enclose));
    return ops::rsub_scalar(g, Scalar(1));
}

double giou(const BBox& a, const BBox& b) {
    require_valid(a, "giou");
    require_valid(b, "giou");
    const double iw = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double ih = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = iw * ih;
    const double uni = a.w * a.h + b.w * b.h - inter;
    const double ew = std::max(a.x + a.w, b.x + b.w) - std::min(a.x, b.x);
    const double eh = std::max(a.y + a.h, b.y + b.h) - std::min(a.y, b.y);
    const double enclose = ew * eh;
    return inter / uni - (enclose - uni) / enclose;
}

LossTerms total_loss(const HeadOutput& head, const BBox& gt, const LossWeights& weights) {
    require_valid(gt, "total_loss");
    const int rows = head.rows, cols = head.cols;
    const std::int64_t hw = static_cast<std::int64_t>(rows) * cols;
    const auto [cr, cc] = center_cell(gt, rows, cols);
    const std::int64_t at = static_cast<std::int64_t>(cr) * cols + cc;

    LossTerms out;
    out.focal = focal_loss(head.cls, gaussian_target(gt, rows, cols));

    const Tensor offset = ops::reshape(head.offset, {2 * hw});
    const Tensor size = ops::reshape(head.size, {2 * hw});
    const std::int64_t off_idx[] = {at, hw + at};
    const Tensor off = ops::gather_rows(offset, off_idx);  // (ox, oy)
    const Tensor wh = ops::gather_rows(size, off_idx);     // (w, h)

    const std::vector<Scalar> gt_params{static_cast<Scalar>(gt.cx() * cols - cc), static_cast<Scalar>(gt.cy() * rows - cr),
                                        static_cast<Scalar>(gt.w), static_cast<Scalar>(gt.h)};
    const std::vector<Tensor> parts{off, wh};
    const Tensor params = ops::concat_rows(parts);
    out.l1 = ops::mean(ops::abs(ops::sub(params, Tensor(Shape{4}, gt_params))));

    // Decoded box at the ground-truth cell: center = (cell + offset) / grid.
    const Tensor cell = Tensor(Shape{2}, std::vector<Scalar>{static_cast<Scalar>(cc), static_cast<Scalar>(cr)});
    const Tensor inv_grid =
        Tensor(Shape{2}, std::vector<Scalar>{Scalar(1) / static_cast<Scalar>(cols), Scalar(1) / static_cast<Scalar>(rows)});
    const Tensor center = ops::mul(ops::add(off, cell), inv_grid);
    const Tensor corner = ops::sub(center, ops::mul_scalar(wh, Scalar(0.5)));
    const std::vector<Tensor> box_parts{corner, wh};
    out.giou = giou_loss(ops::concat_rows(box_parts), gt);

    out.total = ops::add(out.focal, ops::add(ops::mul_scalar(out.giou, static_cast<Scalar>(weights.iou)),
                                             ops::mul_scalar(out.l1, static_cast<Scalar>(weights.l1))));
    return out;
}

}  // namespace ctxtrack
