// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctxtrack/head.hpp"
#include "ctxtrack/image.hpp"

namespace ctxtrack {

enum class Scenario { Drift, Distractor, Occlude };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

/// Synthetic single-target scene. Sizes are fractions of the frame side,
/// speeds are pixels per frame, drift rates are per frame.
struct SceneConfig {
    int frame_size = 64;
    int length = 100;

    double size_min = 0.22;
    double size_max = 0.34;
    double speed = 1.0;
    double scale_wobble = 0.15;  // relative amplitude of the slow size oscillation
    double hue_drift = 0.003;    // hue turns per frame
    double shape_drift = 0.02;   // vertex-radius phase advance per frame (radians)

    int distractors = 0;
    double distractor_similarity = 0.9;  // 1 means identical starting hue
    double distractor_divergence = 0.004;

    int occlusion_start = -1;  // negative disables the occluder
    int occlusion_length = 0;
    double occlusion_coverage = 0.6;

    double background_amplitude = 0.2;
    double pixel_noise = 0.02;

    /// Throws ConfigError when a target could leave the frame or sizes are
    /// inconsistent.
    void validate() const;
};

SceneConfig scenario_config(Scenario s, int length = 100);

/// Frames plus normalized ground-truth boxes, one per frame.
struct Sequence {
    std::vector<Image> frames;
    std::vector<BBox> boxes;
};

/// Deterministic in (cfg, seed).
Sequence generate_sequence(const SceneConfig& cfg, std::uint64_t seed);

/// Writes 00000001.ppm, 00000002.ppm, ... and groundtruth.txt ("x,y,w,h" in
/// pixels, one line per frame).
void write_sequence(const std::filesystem::path& dir, const Sequence& seq);
Sequence read_sequence(const std::filesystem::path& dir);

/// Box lines in pixels <-> normalized boxes for a frame of the given size.
std::vector<BBox> read_boxes(const std::filesystem::path& file, int width, int height);
void write_boxes(const std::filesystem::path& file, const std::vector<BBox>& boxes, int width, int height);

}  // namespace ctxtrack
