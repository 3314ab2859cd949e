// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctxtrack {

/// Planar float image, channel-major (C x H x W), values nominally in [0, 1].
struct Image {
    int channels = 3;
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w), pixels(static_cast<std::size_t>(c) * h * w, fill) {}

    float& at(int c, int y, int x) { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    /// Sub-window copy; pixels outside the source are zero.
    Image crop(int x0, int y0, int w, int h) const;

    bool operator==(const Image&) const = default;
};

/// Binary PPM (P6, maxval 255). Values are clamped and rounded to 8 bits.
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

}  // namespace ctxtrack
