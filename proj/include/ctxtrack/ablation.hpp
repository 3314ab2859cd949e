// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ctxtrack/metrics.hpp"
#include "ctxtrack/training.hpp"

namespace ctxtrack {

/// Averages are over frames 1..n-1 of every sequence (frame 0 is the given box).
struct SuiteResult {
    MetricReport overall;
    std::vector<MetricReport> per_sequence;
};

SuiteResult evaluate_suite(const Model& model, const TrackerOptions& opts, const std::vector<Sequence>& suite);

/// Same suite scored with the first box repeated on every frame.
SuiteResult evaluate_static_baseline(const std::vector<Sequence>& suite);

struct AblationCell {
    std::string name;  // "<attention>-<update>-<ar|noar>", e.g. "uni-tcm-ar"
    TrackerOptions opts;
};

AblationCell parse_cell(const std::string& name);

/// bi-none-ar, uni-none-ar, uni-template-noar, uni-tcm-noar, uni-template-ar, uni-tcm-ar.
std::vector<AblationCell> standard_grid();

struct AblationSpec {
    std::vector<AblationCell> cells;
    std::vector<std::uint64_t> seeds{0};
    TrainConfig train;
    int eval_sequences = 20;
    int eval_length = 100;
    std::uint64_t eval_seed = 0;
    std::filesystem::path checkpoints;  // empty: train in memory
    bool train_missing = true;          // false: a missing checkpoint is an error
};

/// Grid keys (`cells`, `seeds`, `eval_sequences`, `eval_length`, `eval_seed`,
/// `checkpoints`, `train_missing`) plus every training key.
AblationSpec ablation_spec_from(const KeyValueConfig& kv);

std::filesystem::path checkpoint_path(const AblationSpec& spec, const AblationCell& cell, std::uint64_t seed);

struct AblationRow {
    AblationCell cell;
    std::uint64_t seed = 0;
    MetricReport report;
};

using AblationProgress = std::function<void(const AblationRow&)>;

/// Every cell is trained (or loaded) with the same data and seeds, then
/// scored on the same held-out suite. Rows come out cell-major, seed-minor.
std::vector<AblationRow> run_ablation(const AblationSpec& spec, const AblationProgress& progress = {});

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

struct PairedTest {
    int n = 0;
    double mean_diff = 0;
    double t = 0;
    double p_one_sided = 1;  // H1: mean(a - b) > 0
};

/// Throws std::invalid_argument on length mismatch or fewer than two pairs.
PairedTest paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace ctxtrack
