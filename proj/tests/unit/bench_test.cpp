// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "ctxtrack/ablation.hpp"
#include "ctxtrack/flops.hpp"
#include "ctxtrack/synth.hpp"
#include "test_util.hpp"

namespace ctxtrack {
namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ctxtrack_bench_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

TEST(Synth, SameSeedGivesIdenticalFrames) {
    const SceneConfig cfg = scenario_config(Scenario::Distractor, 20);
    const Sequence a = generate_sequence(cfg, 4), b = generate_sequence(cfg, 4), c = generate_sequence(cfg, 5);
    EXPECT_EQ(a.frames, b.frames);
    EXPECT_EQ(a.boxes, b.boxes);
    EXPECT_NE(a.frames, c.frames);
    EXPECT_EQ(a.frames.size(), 20u);
    EXPECT_EQ(a.boxes.size(), 20u);
}

TEST(Synth, StillTargetKeepsOneBox) {
    SceneConfig cfg = scenario_config(Scenario::Drift, 30);
    cfg.speed = 0;
    cfg.hue_drift = 0;
    cfg.shape_drift = 0;
    cfg.scale_wobble = 0;
    const Sequence s = generate_sequence(cfg, 9);
    for (const auto& b : s.boxes) EXPECT_EQ(b, s.boxes.front());
}

TEST(Synth, HueDriftMovesTargetColorMonotonically) {
    SceneConfig cfg = scenario_config(Scenario::Drift, 81);
    cfg.speed = 0;
    cfg.shape_drift = 0;
    cfg.scale_wobble = 0;
    cfg.pixel_noise = 0;
    cfg.background_amplitude = 0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Sequence s = generate_sequence(cfg, seed);
        auto mean_color = [&](int t) {
            const auto& f = s.frames[static_cast<std::size_t>(t)];
            const BBox& b = s.boxes[static_cast<std::size_t>(t)];
            std::array<double, 3> m{};
            int n = 0;
            for (int y = static_cast<int>(b.y * 64); y < static_cast<int>((b.y + b.h) * 64); ++y)
                for (int x = static_cast<int>(b.x * 64); x < static_cast<int>((b.x + b.w) * 64); ++x, ++n)
                    for (int c = 0; c < 3; ++c) m[c] += f.at(c, y, x);
            for (auto& v : m) v /= n;
            return m;
        };
        const auto base = mean_color(0);
        double prev = 0;
        for (int t = 10; t <= 80; t += 10) {
            const auto m = mean_color(t);
            const double dist = std::hypot(m[0] - base[0], m[1] - base[1], m[2] - base[2]);
            EXPECT_GT(dist, prev) << "seed " << seed << " frame " << t;
            prev = dist;
        }
    }
}

TEST(Synth, BoxesStayInsideTheFrame) {
    for (Scenario sc : {Scenario::Drift, Scenario::Distractor, Scenario::Occlude}) {
        const Sequence s = generate_sequence(scenario_config(sc, 120), 17);
        for (const auto& b : s.boxes) {
            EXPECT_GT(b.w, 0);
            EXPECT_GT(b.h, 0);
            EXPECT_GE(b.x, 0);
            EXPECT_GE(b.y, 0);
            EXPECT_LE(b.x + b.w, 1 + 1e-9);
            EXPECT_LE(b.y + b.h, 1 + 1e-9);
        }
    }
}

TEST(Synth, ScenarioSchedules) {
    EXPECT_EQ(scenario_config(Scenario::Distractor).distractors, 2);
    const SceneConfig occ = scenario_config(Scenario::Occlude, 96);
    EXPECT_EQ(occ.occlusion_start, 32);
    EXPECT_EQ(occ.occlusion_length, 12);
    EXPECT_EQ(parse_scenario(to_string(Scenario::Occlude)), Scenario::Occlude);
    EXPECT_THROW(parse_scenario("fog"), ConfigError);
}

TEST(Synth, InvalidConfigsAreRejected) {
    SceneConfig cfg;
    cfg.size_min = 0.5;
    cfg.size_max = 0.3;
    EXPECT_THROW(generate_sequence(cfg, 0), ConfigError);
    cfg = SceneConfig{};
    cfg.size_max = 0.95;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = SceneConfig{};
    cfg.hue_drift = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Synth, SequenceFilesRoundTrip) {
    const auto dir = scratch_dir("roundtrip");
    const Sequence s = generate_sequence(scenario_config(Scenario::Drift, 5), 2);
    write_sequence(dir, s);
    EXPECT_TRUE(std::filesystem::exists(dir / "00000001.ppm"));
    EXPECT_TRUE(std::filesystem::exists(dir / "groundtruth.txt"));
    const Sequence r = read_sequence(dir);
    ASSERT_EQ(r.frames.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t p = 0; p < s.frames[i].pixels.size(); ++p) {
            ASSERT_NEAR(r.frames[i].pixels[p], s.frames[i].pixels[p], 0.5 / 255 + 1e-6);
        }
        EXPECT_NEAR(r.boxes[i].x, s.boxes[i].x, 1e-6);
        EXPECT_NEAR(r.boxes[i].w, s.boxes[i].w, 1e-6);
    }
    std::filesystem::remove_all(dir);
    EXPECT_THROW(read_sequence(dir), IoError);
}

double corner_iou(const BBox& a, const BBox& b) {
    const double ax2 = a.x + a.w, ay2 = a.y + a.h, bx2 = b.x + b.w, by2 = b.y + b.h;
    const double left = a.x > b.x ? a.x : b.x, right = ax2 < bx2 ? ax2 : bx2;
    const double top = a.y > b.y ? a.y : b.y, bottom = ay2 < by2 ? ay2 : by2;
    if (right <= left || bottom <= top) return 0;
    const double inter = (right - left) * (bottom - top);
    return inter / ((ax2 - a.x) * (ay2 - a.y) + (bx2 - b.x) * (by2 - b.y) - inter);
}

TEST(Metrics, PerfectPredictions) {
    const std::vector<BBox> gt{{0.1, 0.1, 0.2, 0.3}, {0.5, 0.4, 0.1, 0.1}};
    const MetricReport r = compute_metrics(gt, gt, 30);
    EXPECT_DOUBLE_EQ(r.ao, 1);
    EXPECT_DOUBLE_EQ(r.sr50, 1);
    EXPECT_DOUBLE_EQ(r.sr75, 1);
    EXPECT_DOUBLE_EQ(r.auc, 1);
    EXPECT_EQ(r.frames, 2);
    EXPECT_EQ(r.fps, 30);
}

TEST(Metrics, TwoFrameArithmetic) {
    const std::vector<BBox> gt{{0, 0, 1, 1}, {0, 0, 1, 1}};
    const std::vector<BBox> pred{{0, 0, 0.6, 1}, {0, 0, 0.4, 1}};
    const MetricReport r = compute_metrics(pred, gt);
    EXPECT_NEAR(r.ao, 0.5, 1e-12);
    EXPECT_DOUBLE_EQ(r.sr50, 0.5);
    EXPECT_DOUBLE_EQ(r.sr75, 0.0);
    EXPECT_THROW(compute_metrics(std::span(pred).first(1), gt), std::invalid_argument);
    EXPECT_THROW(compute_metrics({}, {}), std::invalid_argument);
}

TEST(Metrics, AverageOverlapMatchesIndependentIou) {
    Rng rng(5);
    std::vector<BBox> pred, gt;
    double sum = 0;
    for (int i = 0; i < 200; ++i) {
        auto box = [&] {
            const double w = rng.uniform(0.05, 0.6), h = rng.uniform(0.05, 0.6);
            return BBox{rng.uniform(0, 1 - w), rng.uniform(0, 1 - h), w, h};
        };
        pred.push_back(box());
        gt.push_back(i % 4 == 0 ? pred.back() : box());
        sum += corner_iou(pred.back(), gt.back());
    }
    const MetricReport r = compute_metrics(pred, gt);
    EXPECT_NEAR(r.ao, sum / 200, 1e-9);
    EXPECT_LE(r.sr75, r.sr50);
    EXPECT_GE(r.auc, 0);
    EXPECT_LE(r.auc, 1);
}

TEST(Metrics, ScalingBothSidesLeavesScoresUnchanged) {
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        const BBox a{rng.uniform(0, 0.5), rng.uniform(0, 0.5), rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5)};
        const BBox b{rng.uniform(0, 0.5), rng.uniform(0, 0.5), rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5)};
        const double s = rng.uniform(0.1, 640);
        EXPECT_NEAR(iou(a, b), iou({a.x * s, a.y * s, a.w * s, a.h * s}, {b.x * s, b.y * s, b.w * s, b.h * s}), 1e-12);
    }
}

TEST(Metrics, DegenerateBoxesScoreZero) {
    EXPECT_EQ(iou(BBox{0, 0, 0, 0.5}, BBox{0, 0, 0.5, 0.5}), 0.0);
    EXPECT_EQ(iou(BBox{0, 0, 0.2, 0.2}, BBox{0.2, 0, 0.2, 0.2}), 0.0);
}

TEST(Metrics, MergeWeightsByFrames) {
    MetricReport a, b;
    a.ao = 1.0;
    a.frames = 3;
    b.ao = 0.0;
    b.frames = 1;
    const std::vector<MetricReport> rs{a, b};
    EXPECT_DOUBLE_EQ(merge_reports(rs).ao, 0.75);
    EXPECT_EQ(merge_reports(rs).frames, 4);
}

TEST(Flops, EmptyReferenceMakesModesEqual) {
    const auto u = attention_flops(64, 0, 64, 4, 4, AttentionMode::Unidirectional);
    const auto b = attention_flops(64, 0, 64, 4, 4, AttentionMode::Bidirectional);
    EXPECT_EQ(u.attention, b.attention);
    EXPECT_EQ(u.projection, b.projection);
    EXPECT_EQ(u.mlp, b.mlp);
}

TEST(Flops, ForcedArithmetic) {
    const auto u = attention_flops(64, 128, 64, 1, 1, AttentionMode::Unidirectional);
    const auto b = attention_flops(64, 128, 64, 1, 1, AttentionMode::Bidirectional);
    EXPECT_EQ(u.attention, 1572864u);
    EXPECT_EQ(b.attention, 4718592u);
    EXPECT_DOUBLE_EQ(static_cast<double>(b.attention) / static_cast<double>(u.attention), 3.0);
}

TEST(Flops, UnidirectionalIsCheaperWheneverReferencesExist) {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const auto ns = rng.integer(1, 1000), nr = rng.integer(1, 2000), heads = rng.integer(1, 8);
        const auto dim = heads * rng.integer(1, 64);
        const auto u = attention_flops(ns, nr, dim, 2, heads, AttentionMode::Unidirectional);
        const auto b = attention_flops(ns, nr, dim, 2, heads, AttentionMode::Bidirectional);
        EXPECT_LT(u.attention, b.attention);
        EXPECT_LT(u.total(), b.total());
    }
}

TEST(Flops, HeadCountDoesNotChangeTheCount) {
    EXPECT_EQ(attention_flops(576, 1152, 768, 12, 12, AttentionMode::Unidirectional).total(),
              attention_flops(576, 1152, 768, 12, 1, AttentionMode::Unidirectional).total());
}

TEST(Flops, RejectsBadSizes) {
    EXPECT_THROW(attention_flops(0, 1, 8, 1, 1, AttentionMode::Unidirectional), std::invalid_argument);
    EXPECT_THROW(attention_flops(1, -1, 8, 1, 1, AttentionMode::Unidirectional), std::invalid_argument);
    EXPECT_THROW(attention_flops(1, 1, 8, 1, 3, AttentionMode::Unidirectional), std::invalid_argument);
}

TEST(Config, ParsesKeyValueLines) {
    const auto kv = KeyValueConfig::parse("# comment\n\n steps = 12 \nname=drift run\nflag = On\nlist = a, b ,c\n", "t");
    EXPECT_EQ(kv.get_int("steps", 0), 12);
    EXPECT_EQ(kv.get_string("name", ""), "drift run");
    EXPECT_TRUE(kv.get_bool("flag", false));
    EXPECT_EQ(kv.get_list("list", {}), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(kv.get_double("missing", 2.5), 2.5);
}

TEST(Config, ErrorsNameTheOrigin) {
    try {
        KeyValueConfig::parse("a = 1\nnot a pair\n", "grid.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("grid.cfg:2"), std::string::npos) << e.what();
    }
    const auto kv = KeyValueConfig::parse("n = 3x\nb = maybe\nx = 1e\n");
    EXPECT_THROW(kv.get_int("n", 0), ConfigError);
    EXPECT_THROW(kv.get_bool("b", false), ConfigError);
    EXPECT_THROW(kv.get_double("x", 0), ConfigError);
    EXPECT_THROW(kv.require_known({"n", "b"}), ConfigError);
    EXPECT_THROW(KeyValueConfig::load("/nonexistent/ctxtrack.cfg"), IoError);
}

TEST(Config, TrainingKeysMapOntoTheConfig) {
    auto kv = KeyValueConfig::parse("model.dim = 32\nlr.backbone = 1e-4\nupdate = template\nautoregressive = off\n");
    const TrainConfig tc = train_config_from(kv);
    EXPECT_EQ(tc.model.encoder.dim, 32);
    EXPECT_DOUBLE_EQ(tc.hyper.lr_backbone, 1e-4);
    EXPECT_EQ(tc.tracker.update, UpdateMode::Template);
    EXPECT_FALSE(tc.tracker.autoregressive);
    kv.set("model.dimension", "3");
    EXPECT_THROW(train_config_from(kv), ConfigError);
}

double student3_upper_tail(double t) {
    const double x = t / std::sqrt(3.0);
    return 0.5 - (x / (1 + x * x) + std::atan(x)) / std::numbers::pi;
}

TEST(PairedTTest, MatchesClosedFormForThreeDegreesOfFreedom) {
    const std::vector<double> a{2, 4, 6, 8}, b{1, 2, 3, 4};
    const PairedTest r = paired_t_test(a, b);
    EXPECT_EQ(r.n, 4);
    EXPECT_DOUBLE_EQ(r.mean_diff, 2.5);
    EXPECT_NEAR(r.t, 2.5 / (std::sqrt(5.0 / 3.0) / 2.0), 1e-12);
    EXPECT_NEAR(r.p_one_sided, student3_upper_tail(r.t), 1e-10);
    EXPECT_NEAR(paired_t_test(b, a).p_one_sided, 1 - r.p_one_sided, 1e-10);
}

TEST(PairedTTest, ConstantDifferencesAndErrors) {
    const std::vector<double> a{1, 2, 3}, b{0, 1, 2};
    EXPECT_EQ(paired_t_test(a, b).p_one_sided, 0.0);
    EXPECT_EQ(paired_t_test(a, a).p_one_sided, 0.5);
    EXPECT_THROW(paired_t_test(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);
    EXPECT_THROW(paired_t_test(a, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST(Ablation, CellNamesAndStandardGrid) {
    const AblationCell c = parse_cell("bi-template-noar");
    EXPECT_EQ(c.opts.attention, AttentionMode::Bidirectional);
    EXPECT_EQ(c.opts.update, UpdateMode::Template);
    EXPECT_FALSE(c.opts.autoregressive);
    EXPECT_THROW(parse_cell("uni-tcm"), ConfigError);
    EXPECT_THROW(parse_cell("uni-tcm-maybe"), ConfigError);
    std::vector<std::string> names;
    for (const auto& cell : standard_grid()) names.push_back(cell.name);
    EXPECT_EQ(names, (std::vector<std::string>{"bi-none-ar", "uni-none-ar", "uni-template-noar", "uni-tcm-noar",
                                               "uni-template-ar", "uni-tcm-ar"}));
}

AblationSpec tiny_spec() {
    const auto kv = KeyValueConfig::parse(
        "cells = uni-tcm-ar\nseeds = 0\neval_sequences = 2\neval_length = 6\n"
        "model.dim = 8\nmodel.layers = 1\nmodel.heads = 2\nmodel.patch = 16\nmodel.mlp_ratio = 2\n"
        "head.hidden = 4\nhead.depth = 1\ntrain_sequences = 2\nsequence_length = 12\nsteps = 2\nmax_gap = 2\n");
    return ablation_spec_from(kv);
}

TEST(Ablation, SingleCellGivesSingleRow) {
    const auto rows = run_ablation(tiny_spec());
    ASSERT_EQ(rows.size(), 1u);
    std::ostringstream csv;
    write_ablation_csv(csv, rows);
    std::istringstream in(csv.str());
    std::string header, row, extra;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header, "cell,attention,update,autoregressive,seed,ao,sr50,sr75,auc,fps");
    EXPECT_EQ(row.rfind("uni-tcm-ar,uni,tcm,1,0,", 0), 0u) << row;
    EXPECT_FALSE(std::getline(in, extra));
}

TEST(Ablation, SeedsVaryOnlyTheScores) {
    AblationSpec spec = tiny_spec();
    spec.seeds = {0, 1};
    const auto rows = run_ablation(spec);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].cell.name, rows[1].cell.name);
    EXPECT_EQ(rows[0].cell.opts.update, rows[1].cell.opts.update);
    EXPECT_NE(rows[0].seed, rows[1].seed);
    EXPECT_NE(rows[0].report.ao, rows[1].report.ao);
}

TEST(Ablation, StoredCheckpointsAreReusedAndMissingOnesReported) {
    AblationSpec spec = tiny_spec();
    spec.checkpoints = scratch_dir("ckpt");
    const auto first = run_ablation(spec);
    EXPECT_TRUE(std::filesystem::exists(checkpoint_path(spec, spec.cells[0], 0)));
    spec.train_missing = false;
    const auto second = run_ablation(spec);
    EXPECT_EQ(first[0].report.ao, second[0].report.ao);
    spec.seeds = {7};
    EXPECT_THROW(run_ablation(spec), IoError);
    std::filesystem::remove_all(spec.checkpoints);
}

TEST(Ablation, StaticBaselineRepeatsTheFirstBox) {
    const auto suite = make_pool(Scenario::Drift, 3, 10, 40);
    const SuiteResult r = evaluate_static_baseline(suite);
    std::vector<double> ious;
    for (const auto& s : suite)
        for (std::size_t t = 1; t < s.boxes.size(); ++t) ious.push_back(corner_iou(s.boxes[0], s.boxes[t]));
    double mean = 0;
    for (double v : ious) mean += v;
    EXPECT_NEAR(r.overall.ao, mean / static_cast<double>(ious.size()), 1e-12);
    EXPECT_EQ(r.per_sequence.size(), 3u);
}

}  // namespace
}  // namespace ctxtrack
