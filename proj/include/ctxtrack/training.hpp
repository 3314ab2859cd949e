// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ctxtrack/config.hpp"
#include "ctxtrack/synth.hpp"
#include "ctxtrack/tracker.hpp"

namespace ctxtrack {

struct TrainConfig {
    ModelConfig model;
    TrainHyper hyper;
    TrackerOptions tracker;
    Scenario scenario = Scenario::Drift;
    int train_sequences = 48;
    int sequence_length = 100;
    std::uint64_t data_seed = 1000;  // training sequence i uses seed data_seed + i
    std::uint64_t seed = 0;          // weight init and sample order
    int steps = 1000;
    int search_frames = 4;
    int max_gap = 20;  // largest frame distance between consecutive unroll frames
    int log_every = 50;

    void validate() const;
};

/// Reads every recognised key; unknown keys raise ConfigError.
TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig base = {});
std::vector<std::string> train_config_keys();

/// One template frame and `search_frames` later frames of one sequence, in
/// temporal order.
TrainSample draw_sample(const std::vector<Sequence>& pool, Rng& rng, int search_frames, int max_gap);

std::vector<Sequence> make_pool(Scenario scenario, int count, int length, std::uint64_t first_seed);

struct TrainLogEntry {
    int step = 0;
    double loss = 0;       // mean over the last logging window
    double seconds = 0;    // wall time since training started
};

using TrainLogger = std::function<void(const TrainLogEntry&)>;

/// Deterministic for a fixed config: the step count, not wall time, bounds the run.
Model train_model(const TrainConfig& cfg, const TrainLogger& log = {});

}  // namespace ctxtrack
