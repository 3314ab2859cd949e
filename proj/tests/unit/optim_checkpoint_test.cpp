// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "ctxtrack/checkpoint.hpp"
#include "ctxtrack/optim.hpp"

namespace ctxtrack {
namespace {

TEST(AdamW, ZeroGradZeroDecayLeavesParamsAndMoments) {
    std::vector<Tensor> p{Tensor::from({3}, {1, -2, 3})};
    const std::vector<Tensor> g{Tensor::zeros({3})};
    const double lr[] = {1e-2};
    AdamWState st = AdamWState::create(p, lr, {0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 5; ++i) adamw_step(p, g, st);
    EXPECT_FLOAT_EQ(p[0].at(0), 1);
    EXPECT_FLOAT_EQ(p[0].at(1), -2);
    for (Scalar v : st.m[0]) EXPECT_EQ(v, 0);
    for (Scalar v : st.v[0]) EXPECT_EQ(v, 0);
    EXPECT_EQ(st.step, 5);
}

TEST(AdamW, DecoupledDecayScalesByOneMinusLrWd) {
    std::vector<Tensor> p{Tensor::from({2}, {1.0, -3.0})};
    const std::vector<Tensor> g{Tensor::zeros({2})};
    const double lr[] = {4e-4};
    AdamWState st = AdamWState::create(p, lr, {0.9, 0.999, 1e-8, 1e-4});
    adamw_step(p, g, st);
    EXPECT_NEAR(p[0].at(0), 1.0 * (1 - 4e-4 * 1e-4), 1e-7);
    adamw_step(p, g, st);
    EXPECT_NEAR(p[0].at(1), -3.0 * std::pow(1 - 4e-4 * 1e-4, 2), 1e-6);
}

TEST(AdamW, QuadraticConvergesMonotonicallyAfterWarmup) {
    // loss = (p - 3)^2; Adam with lr 1e-2 approaches 3 at roughly lr per step.
    std::vector<Tensor> p{Tensor::from({1}, {0.0})};
    const double lr[] = {1e-2};
    AdamWState st = AdamWState::create(p, lr, {0.9, 0.999, 1e-8, 0.0});
    double prev = 3.0;
    for (int i = 0; i < 200; ++i) {
        const std::vector<Tensor> g{Tensor::from({1}, {2.0 * (p[0].at(0) - 3.0)})};
        adamw_step(p, g, st);
        const double dist = std::abs(p[0].at(0) - 3.0);
        if (i >= 5) {
            EXPECT_LE(dist, prev + 1e-7) << "step " << i;
        }
        prev = dist;
    }
    EXPECT_LT(prev, 1.5);
}

TEST(AdamW, RejectsShapeMismatchAndNegativeLr) {
    std::vector<Tensor> p{Tensor::zeros({2})};
    const std::vector<Tensor> g{Tensor::zeros({3})};
    const double lr[] = {1e-3};
    AdamWState st = AdamWState::create(p, lr);
    EXPECT_THROW(adamw_step(p, g, st), ShapeError);
    const double bad[] = {-1.0};
    AdamWState neg = AdamWState::create(p, bad);
    const std::vector<Tensor> g2{Tensor::zeros({2})};
    EXPECT_THROW(adamw_step(p, g2, neg), ConfigError);
}

TEST(Checkpoint, ByteLayoutIsExact) {
    const NamedTensors entries{{"ab", Tensor::from({2}, {1.0, -2.0})}};
    const auto bytes = encode_checkpoint(entries);
    // magic 4 + version 4 + count 4 + namelen 4 + name 2 + dtype 1 + rank 4 + dim 8 + data 8
    ASSERT_EQ(bytes.size(), 39u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LMTK");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[8], 1);
    EXPECT_EQ(bytes[12], 2);
    EXPECT_EQ(bytes[16], 'a');
    EXPECT_EQ(bytes[18], 0);  // f32
    EXPECT_EQ(bytes[19], 1);  // rank
    EXPECT_EQ(bytes[23], 2);  // dim 0
    float v = 0;
    std::memcpy(&v, bytes.data() + 35, 4);
    EXPECT_EQ(v, -2.0f);
}

TEST(Checkpoint, RoundTripThroughFile) {
    const NamedTensors entries{{"w", Tensor::from({2, 2}, {1, 2, 3, 4})}, {"s", Tensor::scalar(5)},
                               {"empty", Tensor(Shape{0, 3})}};
    const auto path = std::filesystem::temp_directory_path() / "ctxtrack_ckpt_roundtrip.bin";
    save_checkpoint(path, entries);
    const NamedTensors back = load_checkpoint(path);
    ASSERT_EQ(back.size(), 3u);
    EXPECT_EQ(back[0].first, "w");
    EXPECT_EQ(back[0].second.shape(), (Shape{2, 2}));
    EXPECT_FLOAT_EQ(back[0].second.at(1, 1), 4);
    EXPECT_EQ(back[1].second.rank(), 0);
    EXPECT_EQ(back[2].second.shape(), (Shape{0, 3}));
    std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptInputsAreRejected) {
    const auto good = encode_checkpoint({{"x", Tensor::from({1}, {1})}});
    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad_magic), IoError);
    auto truncated = good;
    truncated.pop_back();
    EXPECT_THROW(decode_checkpoint(truncated), IoError);
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(decode_checkpoint(trailing), IoError);
    auto bad_dtype = good;
    bad_dtype[4 + 4 + 4 + 4 + 1] = 7;
    EXPECT_THROW(decode_checkpoint(bad_dtype), IoError);
    EXPECT_THROW(load_checkpoint("/nonexistent/ctxtrack.ckpt"), IoError);
}

}  // namespace
}  // namespace ctxtrack
