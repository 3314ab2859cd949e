// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/training.hpp"

#include <algorithm>
#include <chrono>

namespace ctxtrack {

void TrainConfig::validate() const {
    model.encoder.validate();
    tracker.validate();
    if (train_sequences < 1) throw ConfigError("train_sequences must be at least 1");
    if (search_frames < 1) throw ConfigError("search_frames must be at least 1");
    if (max_gap < 1) throw ConfigError("max_gap must be at least 1");
    if (sequence_length <= search_frames) throw ConfigError("sequence_length must exceed search_frames");
    if (steps < 0) throw ConfigError("steps must be non-negative");
    if (hyper.lr_backbone < 0 || hyper.lr_other < 0 || hyper.weight_decay < 0) {
        throw ConfigError("learning rates and weight decay must be non-negative");
    }
}

std::vector<std::string> train_config_keys() {
    return {"model.search_size", "model.template_size", "model.patch",     "model.dim",
            "model.layers",      "model.heads",         "model.mlp_ratio", "model.init_seed",
            "head.hidden",       "head.depth",          "lr.backbone",     "lr.other",
            "weight_decay",      "loss.iou",            "loss.l1",         "attention",
            "update",            "autoregressive",      "reset_period",    "capacity_multiplier",
            "template_interval", "hard_class_scores",   "scenario",        "train_sequences",
            "sequence_length",   "data_seed",           "seed",            "steps",
            "search_frames",     "max_gap",             "log_every"};
}

TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig c) {
    kv.require_known(train_config_keys());
    auto i = [&](const char* key, auto fallback) {
        return static_cast<decltype(fallback)>(kv.get_int(key, static_cast<std::int64_t>(fallback)));
    };
    auto& e = c.model.encoder;
    e.search_size = i("model.search_size", e.search_size);
    e.template_size = i("model.template_size", e.template_size);
    e.patch = i("model.patch", e.patch);
    e.dim = i("model.dim", e.dim);
    e.layers = i("model.layers", e.layers);
    e.heads = i("model.heads", e.heads);
    e.mlp_ratio = i("model.mlp_ratio", e.mlp_ratio);
    c.model.init_seed = i("model.init_seed", c.model.init_seed);
    c.model.head_hidden = i("head.hidden", c.model.head_hidden);
    c.model.head_depth = i("head.depth", c.model.head_depth);
    c.hyper.lr_backbone = kv.get_double("lr.backbone", c.hyper.lr_backbone);
    c.hyper.lr_other = kv.get_double("lr.other", c.hyper.lr_other);
    c.hyper.weight_decay = kv.get_double("weight_decay", c.hyper.weight_decay);
    c.hyper.loss.iou = kv.get_double("loss.iou", c.hyper.loss.iou);
    c.hyper.loss.l1 = kv.get_double("loss.l1", c.hyper.loss.l1);
    if (kv.has("attention")) c.tracker.attention = parse_attention(kv.get_string("attention", ""));
    if (kv.has("update")) c.tracker.update = parse_update(kv.get_string("update", ""));
    c.tracker.autoregressive = kv.get_bool("autoregressive", c.tracker.autoregressive);
    c.tracker.reset_period = i("reset_period", c.tracker.reset_period);
    c.tracker.capacity_multiplier = i("capacity_multiplier", c.tracker.capacity_multiplier);
    c.tracker.template_interval = i("template_interval", c.tracker.template_interval);
    c.tracker.hard_class_scores = kv.get_bool("hard_class_scores", c.tracker.hard_class_scores);
    if (kv.has("scenario")) c.scenario = parse_scenario(kv.get_string("scenario", ""));
    c.train_sequences = i("train_sequences", c.train_sequences);
    c.sequence_length = i("sequence_length", c.sequence_length);
    c.data_seed = i("data_seed", c.data_seed);
    c.seed = i("seed", c.seed);
    c.steps = i("steps", c.steps);
    c.search_frames = i("search_frames", c.search_frames);
    c.max_gap = i("max_gap", c.max_gap);
    c.log_every = i("log_every", c.log_every);
    c.validate();
    return c;
}

std::vector<Sequence> make_pool(Scenario scenario, int count, int length, std::uint64_t first_seed) {
    const SceneConfig scene = scenario_config(scenario, length);
    std::vector<Sequence> pool;
    pool.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) pool.push_back(generate_sequence(scene, first_seed + static_cast<std::uint64_t>(i)));
    return pool;
}

TrainSample draw_sample(const std::vector<Sequence>& pool, Rng& rng, int search_frames, int max_gap) {
    if (pool.empty()) throw std::invalid_argument("draw_sample: empty pool");
    const auto& seq = pool[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(pool.size()) - 1))];
    const int len = static_cast<int>(seq.frames.size());
    if (len <= search_frames) throw std::invalid_argument("draw_sample: sequence shorter than the unroll");
    const int span = std::min(len - 1, search_frames * max_gap);
    const int t0 = static_cast<int>(rng.integer(0, len - 1 - span));
    // Distinct sorted offsets in [1, span], drawn by rejection.
    std::vector<int> offsets;
    while (static_cast<int>(offsets.size()) < search_frames) {
        const int o = static_cast<int>(rng.integer(1, span));
        if (std::find(offsets.begin(), offsets.end(), o) == offsets.end()) offsets.push_back(o);
    }
    std::sort(offsets.begin(), offsets.end());
    TrainSample s;
    s.first_frame = seq.frames[static_cast<std::size_t>(t0)];
    s.first_box = seq.boxes[static_cast<std::size_t>(t0)];
    for (int o : offsets) {
        s.search_frames.push_back(seq.frames[static_cast<std::size_t>(t0 + o)]);
        s.search_boxes.push_back(seq.boxes[static_cast<std::size_t>(t0 + o)]);
    }
    return s;
}

Model train_model(const TrainConfig& cfg, const TrainLogger& log) {
    cfg.validate();
    ModelConfig mc = cfg.model;
    mc.init_seed = cfg.model.init_seed + cfg.seed;
    Model model(mc);
    const std::vector<Sequence> pool = make_pool(cfg.scenario, cfg.train_sequences, cfg.sequence_length, cfg.data_seed);
    AdamWState opt = make_optimizer(model, cfg.hyper);
    Rng rng(cfg.seed * 0xD1B54A32D192ED03ULL + 17);
    const auto start = std::chrono::steady_clock::now();
    double window = 0;
    int in_window = 0;
    for (int s = 1; s <= cfg.steps; ++s) {
        const TrainSample sample = draw_sample(pool, rng, cfg.search_frames, cfg.max_gap);
        window += train_step(model, sample, opt, cfg.tracker, cfg.hyper.loss);
        ++in_window;
        if (log && cfg.log_every > 0 && (s % cfg.log_every == 0 || s == cfg.steps)) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            log({s, window / in_window, secs});
            window = 0;
            in_window = 0;
        }
    }
    return model;
}

}  // namespace ctxtrack
