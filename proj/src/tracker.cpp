// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "ctxtrack/autograd.hpp"

namespace ctxtrack {

// ---------------------------------------------------------------- Model

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.encoder.validate();
    Rng rng(cfg_.init_seed);
    encoder_ = std::make_shared<Encoder>(cfg_.encoder, rng);
    head_ = std::make_shared<Head>(HeadConfig{cfg_.encoder.dim, cfg_.head_hidden, cfg_.head_depth}, rng);
    embeds_.target = nn::normal_parameter({cfg_.encoder.dim}, 0.02, rng);
    embeds_.background = nn::normal_parameter({cfg_.encoder.dim}, 0.02, rng);
}

NamedTensors Model::named_parameters() const {
    NamedTensors out = encoder_->named_parameters();
    for (auto& e : head_->named_parameters()) out.push_back(std::move(e));
    out.emplace_back("tcm.embed.target", embeds_.target);
    out.emplace_back("tcm.embed.background", embeds_.background);
    return out;
}

namespace {

const char* const kMetaKeys[] = {"meta.search_size", "meta.template_size", "meta.patch", "meta.dim",
                                 "meta.layers",      "meta.heads",         "meta.mlp_ratio", "meta.channels",
                                 "meta.head_hidden", "meta.head_depth"};

}  // namespace

NamedTensors Model::state() const {
    NamedTensors out = named_parameters();
    for (auto& e : head_->named_buffers()) out.push_back(std::move(e));
    const auto& e = cfg_.encoder;
    const int values[] = {e.search_size, e.template_size, e.patch,  e.dim,           e.layers,
                          e.heads,       e.mlp_ratio,     e.channels, cfg_.head_hidden, cfg_.head_depth};
    for (std::size_t i = 0; i < std::size(values); ++i) {
        out.emplace_back(kMetaKeys[i], Tensor::scalar(static_cast<Scalar>(values[i])));
    }
    return out;
}

Model Model::from_state(const NamedTensors& state) {
    std::map<std::string, int> meta;
    for (const auto& [name, t] : state) {
        if (name.rfind("meta.", 0) == 0) meta[name] = static_cast<int>(std::lround(t.item()));
    }
    auto get = [&](const char* key) {
        auto it = meta.find(key);
        if (it == meta.end()) throw IoError(std::string("checkpoint is missing ") + key);
        return it->second;
    };
    ModelConfig cfg;
    cfg.encoder.search_size = get("meta.search_size");
    cfg.encoder.template_size = get("meta.template_size");
    cfg.encoder.patch = get("meta.patch");
    cfg.encoder.dim = get("meta.dim");
    cfg.encoder.layers = get("meta.layers");
    cfg.encoder.heads = get("meta.heads");
    cfg.encoder.mlp_ratio = get("meta.mlp_ratio");
    cfg.encoder.channels = get("meta.channels");
    cfg.head_hidden = get("meta.head_hidden");
    cfg.head_depth = get("meta.head_depth");
    Model model(cfg);
    NamedTensors dst = model.named_parameters();
    for (auto& e : model.head_->named_buffers()) dst.push_back(std::move(e));
    nn::assign_by_name(dst, state);
    return model;
}

void Model::save(const std::filesystem::path& path) const { save_checkpoint(path, state()); }

Model Model::load(const std::filesystem::path& path) { return from_state(load_checkpoint(path)); }

std::vector<Tensor> Model::backbone_parameters() const { return encoder_->parameters(); }

std::vector<Tensor> Model::other_parameters() const {
    std::vector<Tensor> out = head_->parameters();
    out.push_back(embeds_.target);
    out.push_back(embeds_.background);
    return out;
}

// ---------------------------------------------------------------- options

void TrackerOptions::validate() const {
    if (reset_period <= 0) throw ConfigError("reset period must be positive");
    if (capacity_multiplier < 1) throw ConfigError("capacity multiplier must be at least 1");
    if (template_interval <= 0) throw ConfigError("template interval must be positive");
}

std::string to_string(AttentionMode m) { return m == AttentionMode::Unidirectional ? "uni" : "bi"; }

std::string to_string(UpdateMode m) {
    switch (m) {
        case UpdateMode::Tcm: return "tcm";
        case UpdateMode::Template: return "template";
        case UpdateMode::None: return "none";
    }
    return "?";
}

AttentionMode parse_attention(const std::string& s) {
    if (s == "uni") return AttentionMode::Unidirectional;
    if (s == "bi") return AttentionMode::Bidirectional;
    throw ConfigError("unknown attention mode '" + s + "' (expected uni|bi)");
}

UpdateMode parse_update(const std::string& s) {
    if (s == "tcm") return UpdateMode::Tcm;
    if (s == "template") return UpdateMode::Template;
    if (s == "none") return UpdateMode::None;
    throw ConfigError("unknown update mode '" + s + "' (expected tcm|template|none)");
}

// ---------------------------------------------------------------- geometry

CropWindow template_window(const Image& frame, const BBox& box, int template_size) {
    if (frame.width < template_size || frame.height < template_size) {
        throw ShapeError("template crop larger than the frame");
    }
    const double cx = box.cx() * frame.width, cy = box.cy() * frame.height;
    CropWindow w;
    w.size = template_size;
    w.x0 = std::clamp(static_cast<int>(std::lround(cx - template_size / 2.0)), 0, frame.width - template_size);
    w.y0 = std::clamp(static_cast<int>(std::lround(cy - template_size / 2.0)), 0, frame.height - template_size);
    return w;
}

BBox box_in_window(const Image& frame, const BBox& box, const CropWindow& win) {
    const double s = win.size;
    double x1 = (box.x * frame.width - win.x0) / s, y1 = (box.y * frame.height - win.y0) / s;
    double x2 = ((box.x + box.w) * frame.width - win.x0) / s, y2 = ((box.y + box.h) * frame.height - win.y0) / s;
    x1 = std::clamp(x1, 0.0, 1.0);
    y1 = std::clamp(y1, 0.0, 1.0);
    x2 = std::clamp(x2, 0.0, 1.0);
    y2 = std::clamp(y2, 0.0, 1.0);
    return {x1, y1, x2 - x1, y2 - y1};
}

std::vector<Scalar> box_cell_scores(const BBox& box, const PatchGrid& grid) {
    std::vector<Scalar> c;
    c.reserve(grid.cells.size());
    for (const auto& cell : grid.cells) {
        const double cx1 = static_cast<double>(cell.col) / grid.cols, cx2 = static_cast<double>(cell.col + 1) / grid.cols;
        const double cy1 = static_cast<double>(cell.row) / grid.rows, cy2 = static_cast<double>(cell.row + 1) / grid.rows;
        const double ow = std::min(cx2, box.x + box.w) - std::max(cx1, box.x);
        const double oh = std::min(cy2, box.y + box.h) - std::max(cy1, box.y);
        c.push_back(ow > 0 && oh > 0 ? Scalar(1) : Scalar(0));
    }
    return c;
}

// ---------------------------------------------------------------- tracking

namespace {

void require_valid_box(const BBox& b) {
    if (!(b.w > 0 && b.h > 0 && b.x >= 0 && b.y >= 0 && b.x + b.w <= 1 + 1e-6 && b.y + b.h <= 1 + 1e-6)) {
        throw std::domain_error("invalid box: must have positive size and lie inside the frame");
    }
}

/// Reference tokens for a template crop. Bidirectional mode keeps raw patch
/// embeddings because the encoder re-processes references jointly each frame.
struct CropTokens {
    Tensor tokens;
    PatchGrid grid;
};

CropTokens encode_crop(const Model& model, const Image& crop, const Tensor& reference, const TrackerOptions& opts) {
    if (opts.attention == AttentionMode::Bidirectional) {
        PatchTokens pt = model.encoder().patch_embed(crop);
        return {pt.tokens, pt.grid};
    }
    EncodeOutput enc = model.encoder().encode(crop, reference, opts.attention);
    return {enc.search_tokens, enc.grid};
}

Tensor integrate_with_box(const Model& model, const CropTokens& ct, const BBox& box_in_crop) {
    Tensor cls(Shape{static_cast<std::int64_t>(ct.grid.cells.size())}, box_cell_scores(box_in_crop, ct.grid));
    return integrate(ct.tokens, cls, model.embeddings());
}

}  // namespace

TrackState init(const Model& model, const Image& frame, const BBox& box, const TrackerOptions& opts) {
    opts.validate();
    require_valid_box(box);
    const auto& ec = model.config().encoder;
    const CropWindow win = template_window(frame, box, ec.template_size);
    const Image crop = frame.crop(win.x0, win.y0, win.size, win.size);
    const CropTokens ct = encode_crop(model, crop, empty_reference(ec.dim), opts);
    const Tensor tokens = integrate_with_box(model, ct, box_in_window(frame, box, win));

    TrackState st;
    st.frame_id = 0;
    st.last_box = box;
    st.reset_period = opts.reset_period;
    auto& bank = st.bank;
    bank.tokens = tokens;
    bank.importance.assign(ct.grid.cells.size(), 0.0f);
    for (const auto& cell : ct.grid.cells) bank.provenance.push_back({0, cell});
    bank.target_len = bank.size();
    bank.capacity_max = opts.capacity_multiplier * ec.search_tokens();
    bank.frames_since_reset = 0;
    if (bank.target_len + ec.search_tokens() > bank.capacity_max) {
        throw ConfigError("bank capacity cannot hold the template plus one frame of search tokens");
    }
    st.initial_tokens = tokens;
    st.initial_provenance = bank.provenance;
    return st;
}

StepResult step(const Model& model, TrackState& state, const Image& frame, const TrackerOptions& opts, bool training) {
    const auto& ec = model.config().encoder;
    if (frame.width != ec.search_size || frame.height != ec.search_size) {
        throw ShapeError("step: frame does not match the search resolution");
    }
    ++state.frame_id;
    auto& bank = state.bank;
    const EncodeOutput enc = model.encoder().encode(frame, bank.tokens, opts.attention);
    StepResult res;
    res.head = model.head().predict(enc.search_tokens, enc.grid.rows, enc.grid.cols, training);
    std::tie(res.box, res.confidence) = decode_box(res.head);

    const std::int64_t ns = enc.search_tokens.dim(0);
    std::vector<float> cls(static_cast<std::size_t>(ns));
    for (std::int64_t i = 0; i < ns; ++i) cls[static_cast<std::size_t>(i)] = static_cast<float>(res.head.cls.at(i));
    Tensor class_scores;
    if (opts.hard_class_scores) {
        std::vector<Scalar> hard(cls.size());
        for (std::size_t i = 0; i < cls.size(); ++i) hard[i] = cls[i] >= 0.5f ? Scalar(1) : Scalar(0);
        class_scores = Tensor(Shape{ns}, std::move(hard));
    } else {
        class_scores = ops::reshape(res.head.cls, {ns});
    }

    switch (opts.update) {
        case UpdateMode::Tcm: {
            accumulate_importance(bank, enc.cross_attention, cls);
            Tensor base;
            if (opts.attention == AttentionMode::Bidirectional) {
                base = model.encoder().patch_embed(frame).tokens;
            } else if (opts.autoregressive) {
                base = enc.search_tokens;
            } else {
                base = model.encoder().encode(frame, empty_reference(ec.dim), opts.attention).search_tokens;
            }
            update_bank(bank, integrate(base, class_scores, model.embeddings()), state.frame_id, enc.grid);
            break;
        }
        case UpdateMode::Template: {
            if (state.frame_id % opts.template_interval == 0 && res.box.w > 0 && res.box.h > 0) {
                const CropWindow win = template_window(frame, res.box, ec.template_size);
                const Image crop = frame.crop(win.x0, win.y0, win.size, win.size);
                const Tensor ref = opts.autoregressive ? bank.tokens : empty_reference(ec.dim);
                const CropTokens ct = encode_crop(model, crop, ref, opts);
                const Tensor fresh = integrate_with_box(model, ct, box_in_window(frame, res.box, win));
                const std::vector<Tensor> parts{state.initial_tokens, fresh};
                bank.tokens = ops::concat_rows(parts);
                bank.provenance = state.initial_provenance;
                for (const auto& cell : ct.grid.cells) bank.provenance.push_back({state.frame_id, cell});
                bank.importance.assign(bank.provenance.size(), 0.0f);
            }
            break;
        }
        case UpdateMode::None:
            break;
    }
    state.last_box = res.box;

    ++bank.frames_since_reset;
    if (bank.frames_since_reset >= state.reset_period) {
        reset_importance(bank);
        ++state.resets;
        res.reset = true;
    }
    return res;
}

SequenceResult run_sequence(const Model& model, const std::vector<Image>& frames, const BBox& init_box,
                            const TrackerOptions& opts, const StepObserver& observer) {
    if (frames.empty()) throw std::invalid_argument("run_sequence: at least one frame required");
    NoGradScope no_grad;
    SequenceResult out;
    TrackState state = init(model, frames[0], init_box, opts);
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const auto start = std::chrono::steady_clock::now();
        StepResult r = step(model, state, frames[t], opts, false);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out.boxes.push_back(r.box);
        out.confidence.push_back(r.confidence);
        out.latency_ms.push_back(ms);
        out.trace.push_back({state.frame_id, r.confidence, state.bank.size(), r.reset, ms});
        if (observer) observer(state, r);
    }
    return out;
}

// ---------------------------------------------------------------- training

AdamWState make_optimizer(const Model& model, const TrainHyper& hyper) {
    std::vector<Tensor> params = model.backbone_parameters();
    std::vector<double> lrs(params.size(), hyper.lr_backbone);
    for (auto& p : model.other_parameters()) {
        params.push_back(p);
        lrs.push_back(hyper.lr_other);
    }
    AdamWHyper h;
    h.weight_decay = hyper.weight_decay;
    return AdamWState::create(params, lrs, h);
}

namespace {

Tensor unroll_loss(const Model& model, const TrainSample& sample, const TrackerOptions& opts,
                   const LossWeights& weights, bool training) {
    if (sample.search_frames.empty() || sample.search_frames.size() != sample.search_boxes.size()) {
        throw std::invalid_argument("train sample needs matching search frames and boxes");
    }
    TrackState st = init(model, sample.first_frame, sample.first_box, opts);
    Tensor total;
    for (std::size_t i = 0; i < sample.search_frames.size(); ++i) {
        const StepResult r = step(model, st, sample.search_frames[i], opts, training);
        const Tensor l = total_loss(r.head, sample.search_boxes[i], weights).total;
        total = i == 0 ? l : ops::add(total, l);
    }
    return ops::mul_scalar(total, Scalar(1) / static_cast<Scalar>(sample.search_frames.size()));
}

}  // namespace

double train_step(const Model& model, const TrainSample& sample, AdamWState& opt, const TrackerOptions& opts,
                  const LossWeights& weights) {
    std::vector<Tensor> params = model.backbone_parameters();
    for (auto& p : model.other_parameters()) params.push_back(p);
    for (auto& p : params) p.zero_grad();

    Tape tape;
    double value = 0;
    {
        TapeScope scope(tape);
        const Tensor loss = unroll_loss(model, sample, opts, weights, true);
        value = loss.item();
        if (!std::isfinite(value)) {
            throw NumericError("train_step: non-finite loss after " + std::to_string(opt.step) + " updates");
        }
        tape.backward(loss);
    }
    adamw_step(params, opt);
    for (auto& p : params) p.zero_grad();
    return value;
}

double evaluate_sample(const Model& model, const TrainSample& sample, const TrackerOptions& opts,
                       const LossWeights& weights, bool training_mode) {
    NoGradScope no_grad;
    return unroll_loss(model, sample, opts, weights, training_mode).item();
}

}  // namespace ctxtrack
