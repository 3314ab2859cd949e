// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/head.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ctxtrack {

namespace {

Tensor conv_weight(std::int64_t cout, std::int64_t cin, std::int64_t k, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(cin * k * k));
    return nn::normal_parameter({cout, cin, k, k}, std, rng);
}

}  // namespace

Head::Branch Head::make_branch(int out_channels, double out_bias, Rng& rng) const {
    Branch b;
    int cin = cfg_.in_dim;
    for (int i = 0; i < cfg_.depth; ++i) {
        Block blk;
        blk.conv_w = conv_weight(cfg_.hidden, cin, 3, rng);
        blk.conv_b = nn::parameter({cfg_.hidden});
        blk.bn_w = nn::parameter({cfg_.hidden}, Scalar(1));
        blk.bn_b = nn::parameter({cfg_.hidden});
        blk.stats.running_mean = Tensor(Shape{cfg_.hidden});
        blk.stats.running_var = Tensor(Shape{cfg_.hidden}, Scalar(1));
        b.blocks.push_back(std::move(blk));
        cin = cfg_.hidden;
    }
    b.out_w = nn::normal_parameter({out_channels, cin, 1, 1}, 0.01, rng);
    b.out_b = nn::parameter({out_channels}, static_cast<Scalar>(out_bias));
    return b;
}

Head::Head(const HeadConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.in_dim <= 0 || cfg_.hidden <= 0 || cfg_.depth <= 0) throw ConfigError("head config: sizes must be positive");
    // sigmoid(-2.19) ~= 0.1
    cls_ = make_branch(1, -2.19, rng);
    offset_ = make_branch(2, 0.0, rng);
    size_ = make_branch(2, 0.0, rng);
}

Tensor Head::run_branch(const Branch& b, const Tensor& x, bool training) const {
    Tensor y = x;
    for (const auto& blk : b.blocks) {
        y = ops::conv2d(y, blk.conv_w, blk.conv_b);
        y = ops::batch_norm(y, blk.bn_w, blk.bn_b, blk.stats, training);
        y = ops::relu(y);
    }
    return ops::sigmoid(ops::conv2d(y, b.out_w, b.out_b));
}

HeadOutput Head::predict(const Tensor& tokens, int rows, int cols, bool training) const {
    if (tokens.rank() != 2 || tokens.dim(1) != cfg_.in_dim) {
        throw ShapeError("head: expected (N, " + std::to_string(cfg_.in_dim) + ") tokens, got " + shape_str(tokens.shape()));
    }
    if (rows <= 0 || cols <= 0 || tokens.dim(0) != static_cast<std::int64_t>(rows) * cols) {
        throw ShapeError("head: " + std::to_string(tokens.dim(0)) + " tokens do not form a " + std::to_string(rows) +
                         "x" + std::to_string(cols) + " grid");
    }
    const Tensor fmap = ops::reshape(ops::transpose(tokens), {cfg_.in_dim, rows, cols});
    HeadOutput out;
    out.rows = rows;
    out.cols = cols;
    out.cls = ops::reshape(run_branch(cls_, fmap, training), {rows, cols});
    out.offset = run_branch(offset_, fmap, training);
    out.size = run_branch(size_, fmap, training);
    return out;
}

NamedTensors Head::named_parameters() const {
    NamedTensors out;
    auto add = [&](const Branch& b, const std::string& p) {
        for (std::size_t i = 0; i < b.blocks.size(); ++i) {
            const std::string q = p + ".block" + std::to_string(i);
            out.emplace_back(q + ".conv.weight", b.blocks[i].conv_w);
            out.emplace_back(q + ".conv.bias", b.blocks[i].conv_b);
            out.emplace_back(q + ".bn.weight", b.blocks[i].bn_w);
            out.emplace_back(q + ".bn.bias", b.blocks[i].bn_b);
        }
        out.emplace_back(p + ".out.weight", b.out_w);
        out.emplace_back(p + ".out.bias", b.out_b);
    };
    add(cls_, "head.cls");
    add(offset_, "head.offset");
    add(size_, "head.size");
    return out;
}

NamedTensors Head::named_buffers() const {
    NamedTensors out;
    auto add = [&](const Branch& b, const std::string& p) {
        for (std::size_t i = 0; i < b.blocks.size(); ++i) {
            const std::string q = p + ".block" + std::to_string(i) + ".bn";
            out.emplace_back(q + ".running_mean", b.blocks[i].stats.running_mean);
            out.emplace_back(q + ".running_var", b.blocks[i].stats.running_var);
        }
    };
    add(cls_, "head.cls");
    add(offset_, "head.offset");
    add(size_, "head.size");
    return out;
}

std::vector<Tensor> Head::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::pair<BBox, double> decode_box(const HeadOutput& h) {
    const int rows = h.rows, cols = h.cols;
    const std::int64_t hw = static_cast<std::int64_t>(rows) * cols;
    std::int64_t best = 0;
    for (std::int64_t i = 1; i < hw; ++i) {
        if (h.cls.at(i) > h.cls.at(best)) best = i;
    }
    const auto r = static_cast<int>(best / cols);
    const auto c = static_cast<int>(best % cols);
    const double ox = h.offset.at(best), oy = h.offset.at(hw + best);
    const double w = h.size.at(best), hh = h.size.at(hw + best);
    const double cx = (c + ox) / cols;
    const double cy = (r + oy) / rows;
    const double x1 = std::clamp(cx - w / 2, 0.0, 1.0), y1 = std::clamp(cy - hh / 2, 0.0, 1.0);
    const double x2 = std::clamp(cx + w / 2, 0.0, 1.0), y2 = std::clamp(cy + hh / 2, 0.0, 1.0);
    return {BBox{x1, y1, x2 - x1, y2 - y1}, static_cast<double>(h.cls.at(best))};
}

}  // namespace ctxtrack
