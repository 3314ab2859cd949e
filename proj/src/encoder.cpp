// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/encoder.hpp"

#include <cmath>
#include <string>

namespace ctxtrack {

void EncoderConfig::validate() const {
    if (patch <= 0 || dim <= 0 || layers <= 0 || heads <= 0 || mlp_ratio <= 0 || channels <= 0) {
        throw ConfigError("encoder config: sizes must be positive");
    }
    if (search_size % patch != 0 || template_size % patch != 0) {
        throw ConfigError("encoder config: image sizes must be divisible by the patch size");
    }
    if (template_size > search_size) throw ConfigError("encoder config: template larger than search frame");
    if (dim % heads != 0) throw ConfigError("encoder config: dim must be divisible by heads");
}

Tensor empty_reference(int dim) { return Tensor(Shape{0, dim}); }

Encoder::Encoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const std::int64_t d = cfg_.dim;
    const std::int64_t patch_len = static_cast<std::int64_t>(cfg_.channels) * cfg_.patch * cfg_.patch;
    patch_embed_ = nn::Linear::create(patch_len, d, rng);
    pos_embed_ = nn::normal_parameter({cfg_.search_tokens(), d}, 0.02, rng);
    for (int j = 0; j < cfg_.layers; ++j) {
        EncoderLayer layer;
        layer.ln1 = nn::LayerNorm::create(d);
        layer.q = nn::Linear::create(d, d, rng);
        layer.kv = nn::Linear::create(d, 2 * d, rng);
        layer.proj = nn::Linear::create(d, d, rng);
        layer.ln2 = nn::LayerNorm::create(d);
        layer.fc1 = nn::Linear::create(d, d * cfg_.mlp_ratio, rng);
        layer.fc2 = nn::Linear::create(d * cfg_.mlp_ratio, d, rng);
        layers_.push_back(std::move(layer));
    }
    norm_ = nn::LayerNorm::create(d);
}

PatchTokens Encoder::patch_embed(const Image& frame) const {
    const int P = cfg_.patch;
    if (frame.channels != cfg_.channels) throw ShapeError("patch_embed: channel count mismatch");
    if (frame.height % P != 0 || frame.width % P != 0) {
        throw ShapeError("patch_embed: frame " + std::to_string(frame.height) + "x" + std::to_string(frame.width) +
                         " not divisible by patch " + std::to_string(P));
    }
    const int rows = frame.height / P, cols = frame.width / P;
    const int G = cfg_.search_grid();
    if (rows > G || cols > G) throw ShapeError("patch_embed: frame larger than the positional grid");
    const std::int64_t n = static_cast<std::int64_t>(rows) * cols;
    const std::int64_t patch_len = static_cast<std::int64_t>(cfg_.channels) * P * P;

    PatchTokens out;
    out.grid.rows = rows;
    out.grid.cols = cols;
    Tensor patches(Shape{n, patch_len});
    std::vector<std::int64_t> pos_rows;
    pos_rows.reserve(static_cast<std::size_t>(n));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::int64_t t = static_cast<std::int64_t>(r) * cols + c;
            Scalar* dst = patches.ptr() + t * patch_len;
            for (int ch = 0; ch < cfg_.channels; ++ch)
                for (int py = 0; py < P; ++py)
                    for (int px = 0; px < P; ++px)
                        *dst++ = static_cast<Scalar>(frame.at(ch, r * P + py, c * P + px));
            out.grid.cells.push_back({r, c});
            pos_rows.push_back(static_cast<std::int64_t>(r) * G + c);
        }
    }
    out.tokens = ops::add(patch_embed_(patches), ops::gather_rows(pos_embed_, pos_rows));
    return out;
}

LayerOutput Encoder::attention_block(int layer, const Tensor& search, const Tensor& reference,
                                     bool update_reference) const {
    if (layer < 0 || layer >= cfg_.layers) throw ShapeError("encoder layer index out of range");
    const std::int64_t d = cfg_.dim;
    if (search.rank() != 2 || search.dim(1) != d) throw ShapeError("encoder: search tokens must be (Ns, dim)");
    if (reference.rank() != 2 || reference.dim(1) != d) {
        throw ShapeError("encoder: reference tokens have dim " + shape_str(reference.shape()) + ", expected (Nr, " +
                         std::to_string(d) + ")");
    }
    const auto& L = layers_[static_cast<std::size_t>(layer)];
    const std::int64_t nr = reference.dim(0);
    const std::int64_t ns = search.dim(0);
    const int M = cfg_.heads;
    const std::int64_t dh = cfg_.head_dim();

    // Query-side tokens: search only, or [reference; search] in joint mode.
    const bool joint = update_reference && nr > 0;
    const std::vector<Tensor> both{reference, search};
    const Tensor x = joint ? ops::concat_rows(both) : search;
    const Tensor xn = L.ln1(x);
    const Tensor q = L.q(xn);
    Tensor kv;
    if (joint || nr == 0) {
        kv = L.kv(xn);
    } else {
        const std::vector<Tensor> normed{L.ln1(reference), xn};
        kv = L.kv(ops::concat_rows(normed));
    }
    const Tensor k = ops::slice_cols(kv, 0, d);
    const Tensor v = ops::slice_cols(kv, d, 2 * d);

    LayerOutput out;
    out.cross_attention.resize(static_cast<std::size_t>(M));
    out.row_mass.resize(static_cast<std::size_t>(M));
    const std::int64_t q0 = joint ? nr : 0;
    const std::int64_t keys = nr + ns;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    std::vector<Tensor> head_out;
    head_out.reserve(static_cast<std::size_t>(M));
    for (int h = 0; h < M; ++h) {
        const Tensor qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
        const Tensor kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
        const Tensor vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
        const Tensor attn = ops::softmax_rows(ops::mul_scalar(ops::matmul_nt(qh, kh), scale));
        auto& cross = out.cross_attention[static_cast<std::size_t>(h)];
        auto& mass = out.row_mass[static_cast<std::size_t>(h)];
        cross.resize(static_cast<std::size_t>(ns * nr));
        mass.resize(static_cast<std::size_t>(ns));
        for (std::int64_t s = 0; s < ns; ++s) {
            const Scalar* row = attn.ptr() + (q0 + s) * keys;
            double total = 0;
            for (std::int64_t c = 0; c < keys; ++c) total += row[c];
            mass[static_cast<std::size_t>(s)] = static_cast<float>(total);
            for (std::int64_t r = 0; r < nr; ++r) cross[static_cast<std::size_t>(s * nr + r)] = static_cast<float>(row[r]);
        }
        head_out.push_back(ops::matmul(attn, vh));
    }
    const Tensor x1 = ops::add(x, L.proj(ops::concat_cols(head_out)));
    const Tensor x2 = ops::add(x1, L.fc2(ops::gelu(L.fc1(L.ln2(x1)))));
    if (joint) {
        out.reference = ops::slice_rows(x2, 0, nr);
        out.search = ops::slice_rows(x2, nr, nr + ns);
    } else {
        out.reference = reference;
        out.search = x2;
    }
    return out;
}

LayerOutput Encoder::unidirectional_layer(int layer, const Tensor& search, const Tensor& reference) const {
    return attention_block(layer, search, reference, false);
}

LayerOutput Encoder::joint_layer(int layer, const Tensor& search, const Tensor& reference) const {
    return attention_block(layer, search, reference, true);
}

EncodeOutput Encoder::encode(const Image& frame, const Tensor& reference, AttentionMode mode) const {
    PatchTokens pt = patch_embed(frame);
    EncodeOutput out;
    out.grid = std::move(pt.grid);
    const int ns = static_cast<int>(pt.tokens.dim(0));
    const int nr = static_cast<int>(reference.dim(0));
    auto& ca = out.cross_attention;
    ca.layers = cfg_.layers;
    ca.heads = cfg_.heads;
    ca.ns = ns;
    ca.nr = nr;
    ca.values.reserve(static_cast<std::size_t>(cfg_.layers) * cfg_.heads * ns * nr);

    Tensor s = pt.tokens;
    Tensor r = reference;
    for (int j = 0; j < cfg_.layers; ++j) {
        out.layer_references.push_back(r);
        LayerOutput lo = mode == AttentionMode::Unidirectional ? unidirectional_layer(j, s, r) : joint_layer(j, s, r);
        for (const auto& head : lo.cross_attention) ca.values.insert(ca.values.end(), head.begin(), head.end());
        s = lo.search;
        r = lo.reference;
    }
    out.search_tokens = norm_(s);
    return out;
}

NamedTensors Encoder::named_parameters() const {
    NamedTensors out;
    patch_embed_.collect(out, "encoder.patch_embed");
    out.emplace_back("encoder.pos_embed", pos_embed_);
    for (std::size_t j = 0; j < layers_.size(); ++j) {
        const std::string p = "encoder.layer" + std::to_string(j);
        const auto& L = layers_[j];
        L.ln1.collect(out, p + ".ln1");
        L.q.collect(out, p + ".attn.q");
        L.kv.collect(out, p + ".attn.kv");
        L.proj.collect(out, p + ".attn.proj");
        L.ln2.collect(out, p + ".ln2");
        L.fc1.collect(out, p + ".mlp.fc1");
        L.fc2.collect(out, p + ".mlp.fc2");
    }
    norm_.collect(out, "encoder.norm");
    return out;
}

std::vector<Tensor> Encoder::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

}  // namespace ctxtrack
