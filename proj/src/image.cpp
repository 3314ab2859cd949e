// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "ctxtrack/tensor.hpp"

namespace ctxtrack {

Image Image::crop(int x0, int y0, int w, int h) const {
    Image out(channels, h, w);
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int sy = y0 + y, sx = x0 + x;
                if (sy >= 0 && sy < height && sx >= 0 && sx < width) out.at(c, y, x) = at(c, sy, sx);
            }
    return out;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 3) throw IoError("write_ppm: only 3-channel images are supported");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<unsigned char> buf(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
                buf[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

namespace {

int read_header_int(std::istream& in) {
    int c = in.peek();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else {
            in.get();
        }
        c = in.peek();
    }
    int v = 0;
    if (!(in >> v)) throw IoError("malformed PPM header");
    return v;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::string magic(2, '\0');
    f.read(magic.data(), 2);
    if (magic != "P6") throw IoError(path.string() + ": not a binary PPM");
    const int w = read_header_int(f);
    const int h = read_header_int(f);
    const int maxval = read_header_int(f);
    if (w <= 0 || h <= 0 || maxval != 255) throw IoError(path.string() + ": unsupported PPM dimensions or depth");
    f.get();
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError(path.string() + ": truncated pixel data");
    Image img(3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = static_cast<float>(buf[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 255.0f;
    return img;
}

}  // namespace ctxtrack
