// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "ctxtrack/rng.hpp"
#include "ctxtrack/tensor.hpp"

namespace ctxtrack {

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::Drift: return "drift";
        case Scenario::Distractor: return "distractor";
        case Scenario::Occlude: return "occlude";
    }
    return "?";
}

Scenario parse_scenario(const std::string& s) {
    if (s == "drift") return Scenario::Drift;
    if (s == "distractor") return Scenario::Distractor;
    if (s == "occlude") return Scenario::Occlude;
    throw ConfigError("unknown scenario '" + s + "' (expected drift|distractor|occlude)");
}

void SceneConfig::validate() const {
    if (frame_size < 16) throw ConfigError("scene: frame_size must be at least 16");
    if (length < 1) throw ConfigError("scene: length must be at least 1");
    if (!(size_min > 0 && size_min <= size_max)) throw ConfigError("scene: need 0 < size_min <= size_max");
    if (scale_wobble < 0 || scale_wobble >= 1) throw ConfigError("scene: scale_wobble must lie in [0, 1)");
    if (size_max * (1 + scale_wobble) > 0.9) throw ConfigError("scene: target would not fit inside the frame");
    if (speed < 0 || hue_drift < 0 || shape_drift < 0) throw ConfigError("scene: rates must be non-negative");
    if (distractors < 0) throw ConfigError("scene: distractor count must be non-negative");
    if (distractor_similarity < 0 || distractor_similarity > 1) {
        throw ConfigError("scene: distractor_similarity must lie in [0, 1]");
    }
    if (occlusion_start >= 0 && (occlusion_length <= 0 || occlusion_coverage <= 0 || occlusion_coverage > 1)) {
        throw ConfigError("scene: occlusion needs a positive length and coverage in (0, 1]");
    }
    if (background_amplitude < 0 || pixel_noise < 0) throw ConfigError("scene: noise levels must be non-negative");
}

SceneConfig scenario_config(Scenario s, int length) {
    SceneConfig c;
    c.length = length;
    switch (s) {
        case Scenario::Drift:
            c.hue_drift = 0.003;
            break;
        case Scenario::Distractor:
            c.hue_drift = 0.0015;
            c.distractors = 2;
            break;
        case Scenario::Occlude:
            c.hue_drift = 0.0015;
            c.occlusion_start = length / 3;
            c.occlusion_length = std::max(1, length / 8);
            break;
    }
    return c;
}

namespace {

constexpr int kVertices = 7;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Blob {
    double cx = 0, cy = 0;
    double base_w = 0, base_h = 0;
    double vx = 0, vy = 0;
    double hue = 0, hue_rate = 0;
    double wobble_phase = 0, wobble_period = 60;
    std::array<double, kVertices> radius_amp{};
    std::array<double, kVertices> radius_phase{};
    double rotation = 0;
    double stripe_freq = 0.5, stripe_angle = 0;
};

struct Rgb {
    float r, g, b;
};

Rgb hsv(double h, double s, double v) {
    h -= std::floor(h);
    const double hh = h * 6.0;
    const int i = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r = 0, g = 0, b = 0;
    switch (i) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
    return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

double half_extent_max(const Blob& b, const SceneConfig& cfg, bool horizontal) {
    return 0.5 * (horizontal ? b.base_w : b.base_h) * (1 + cfg.scale_wobble);
}

Blob make_blob(const SceneConfig& cfg, Rng& rng, double hue) {
    const double n = cfg.frame_size;
    Blob b;
    b.base_w = rng.uniform(cfg.size_min, cfg.size_max) * n;
    b.base_h = rng.uniform(cfg.size_min, cfg.size_max) * n;
    const double hx = half_extent_max(b, cfg, true), hy = half_extent_max(b, cfg, false);
    b.cx = rng.uniform(hx + 1, n - hx - 1);
    b.cy = rng.uniform(hy + 1, n - hy - 1);
    const double dir = rng.uniform(0, kTwoPi);
    b.vx = cfg.speed * std::cos(dir);
    b.vy = cfg.speed * std::sin(dir);
    b.hue = hue;
    b.hue_rate = cfg.hue_drift;
    b.wobble_phase = rng.uniform(0, kTwoPi);
    b.wobble_period = rng.uniform(40, 90);
    for (int k = 0; k < kVertices; ++k) {
        b.radius_amp[k] = rng.uniform(0.0, 0.2);
        b.radius_phase[k] = rng.uniform(0, kTwoPi);
    }
    b.rotation = rng.uniform(0, kTwoPi);
    b.stripe_freq = rng.uniform(0.5, 1.1);
    b.stripe_angle = rng.uniform(0, kTwoPi);
    return b;
}

struct Polygon {
    std::array<double, kVertices> x{};
    std::array<double, kVertices> y{};
};

Polygon blob_polygon(const Blob& b, const SceneConfig& cfg, int t) {
    const double scale = 1 + cfg.scale_wobble * std::sin(kTwoPi * t / b.wobble_period + b.wobble_phase);
    const double rx = 0.5 * b.base_w * scale, ry = 0.5 * b.base_h * scale;
    Polygon p;
    for (int k = 0; k < kVertices; ++k) {
        const double a = b.rotation + kTwoPi * k / kVertices;
        const double r = 1.0 - b.radius_amp[k] * (0.5 + 0.5 * std::sin(b.radius_phase[k] + cfg.shape_drift * t));
        p.x[k] = b.cx + r * rx * std::cos(a);
        p.y[k] = b.cy + r * ry * std::sin(a);
    }
    return p;
}

bool inside(const Polygon& p, double x, double y) {
    bool in = false;
    for (int i = 0, j = kVertices - 1; i < kVertices; j = i++) {
        if ((p.y[i] > y) != (p.y[j] > y) && x < (p.x[j] - p.x[i]) * (y - p.y[i]) / (p.y[j] - p.y[i]) + p.x[i]) {
            in = !in;
        }
    }
    return in;
}

struct PixelBox {
    int x0, y0, x1, y1;  // inclusive-exclusive
    bool empty() const { return x1 <= x0 || y1 <= y0; }
};

/// Paints the blob and returns the tight box of the painted pixels.
PixelBox paint_blob(Image& img, const Blob& b, const SceneConfig& cfg, int t) {
    const Polygon poly = blob_polygon(b, cfg, t);
    const double hue = b.hue + b.hue_rate * t;
    const double ca = std::cos(b.stripe_angle), sa = std::sin(b.stripe_angle);
    PixelBox box{img.width, img.height, 0, 0};
    const int x_lo = std::max(0, static_cast<int>(std::floor(*std::min_element(poly.x.begin(), poly.x.end()))));
    const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(*std::max_element(poly.x.begin(), poly.x.end()))));
    const int y_lo = std::max(0, static_cast<int>(std::floor(*std::min_element(poly.y.begin(), poly.y.end()))));
    const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(*std::max_element(poly.y.begin(), poly.y.end()))));
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            if (!inside(poly, px, py)) continue;
            const double u = (px - b.cx) * ca + (py - b.cy) * sa;
            const double v = 0.6 + 0.35 * (0.5 + 0.5 * std::sin(b.stripe_freq * u));
            const Rgb c = hsv(hue, 0.85, v);
            img.at(0, y, x) = c.r;
            img.at(1, y, x) = c.g;
            img.at(2, y, x) = c.b;
            box.x0 = std::min(box.x0, x);
            box.y0 = std::min(box.y0, y);
            box.x1 = std::max(box.x1, x + 1);
            box.y1 = std::max(box.y1, y + 1);
        }
    }
    return box;
}

void advance(Blob& b, const SceneConfig& cfg) {
    const double n = cfg.frame_size;
    const double hx = half_extent_max(b, cfg, true), hy = half_extent_max(b, cfg, false);
    b.cx += b.vx;
    b.cy += b.vy;
    if (b.cx < hx + 1 || b.cx > n - hx - 1) {
        b.vx = -b.vx;
        b.cx = std::clamp(b.cx, hx + 1, n - hx - 1);
    }
    if (b.cy < hy + 1 || b.cy > n - hy - 1) {
        b.vy = -b.vy;
        b.cy = std::clamp(b.cy, hy + 1, n - hy - 1);
    }
}

struct Background {
    std::array<std::array<double, 3>, 3> fx{}, fy{}, phase{};
};

Background make_background(Rng& rng) {
    Background bg;
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) {
            bg.fx[c][k] = rng.uniform(-0.25, 0.25);
            bg.fy[c][k] = rng.uniform(-0.25, 0.25);
            bg.phase[c][k] = rng.uniform(0, kTwoPi);
        }
    return bg;
}

void paint_background(Image& img, const Background& bg, const SceneConfig& cfg) {
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += std::sin(bg.fx[c][k] * x + bg.fy[c][k] * y + bg.phase[c][k]);
                img.at(c, y, x) = static_cast<float>(0.5 + cfg.background_amplitude * s / 3.0);
            }
}

void paint_occluder(Image& img, const PixelBox& target, const SceneConfig& cfg, int t) {
    const int tw = target.x1 - target.x0, th = target.y1 - target.y0;
    const int w = std::max(1, static_cast<int>(std::lround(cfg.occlusion_coverage * tw)));
    const double progress =
        cfg.occlusion_length > 1 ? static_cast<double>(t - cfg.occlusion_start) / (cfg.occlusion_length - 1) : 0.5;
    const int x0 = target.x0 + static_cast<int>(std::lround(progress * (tw - w)));
    const int pad = std::max(1, th / 10);
    for (int y = std::max(0, target.y0 - pad); y < std::min(img.height, target.y1 + pad); ++y)
        for (int x = std::max(0, x0); x < std::min(img.width, x0 + w); ++x) {
            const float shade = ((x / 3 + y / 3) % 2 == 0) ? 0.42f : 0.5f;
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = shade;
        }
}

}  // namespace

Sequence generate_sequence(const SceneConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
    const Background bg = make_background(rng);
    Blob target = make_blob(cfg, rng, rng.uniform());
    std::vector<Blob> distractors;
    for (int i = 0; i < cfg.distractors; ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        Blob d = make_blob(cfg, rng, target.hue + sign * 0.5 * (1 - cfg.distractor_similarity));
        d.hue_rate = target.hue_rate + sign * cfg.distractor_divergence;
        distractors.push_back(d);
    }

    Sequence seq;
    const double n = cfg.frame_size;
    for (int t = 0; t < cfg.length; ++t) {
        Image img(3, cfg.frame_size, cfg.frame_size);
        paint_background(img, bg, cfg);
        for (const auto& d : distractors) paint_blob(img, d, cfg, t);
        const PixelBox box = paint_blob(img, target, cfg, t);
        if (box.empty()) throw std::logic_error("synthetic target rasterized to no pixels");
        if (cfg.occlusion_start >= 0 && t >= cfg.occlusion_start && t < cfg.occlusion_start + cfg.occlusion_length) {
            paint_occluder(img, box, cfg, t);
        }
        if (cfg.pixel_noise > 0) {
            for (auto& v : img.pixels) v += static_cast<float>(cfg.pixel_noise * rng.normal());
        }
        for (auto& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
        seq.frames.push_back(std::move(img));
        seq.boxes.push_back({box.x0 / n, box.y0 / n, (box.x1 - box.x0) / n, (box.y1 - box.y0) / n});

        advance(target, cfg);
        for (auto& d : distractors) advance(d, cfg);
    }
    return seq;
}

namespace {

std::string frame_name(std::size_t i) {
    std::ostringstream ss;
    ss << std::setw(8) << std::setfill('0') << (i + 1) << ".ppm";
    return ss.str();
}

}  // namespace

void write_boxes(const std::filesystem::path& file, const std::vector<BBox>& boxes, int width, int height) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << std::setprecision(10);
    for (const auto& b : boxes) {
        out << b.x * width << ',' << b.y * height << ',' << b.w * width << ',' << b.h * height << '\n';
    }
    if (!out) throw IoError("write failed for " + file.string());
}

std::vector<BBox> read_boxes(const std::filesystem::path& file, int width, int height) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::vector<BBox> boxes;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double v[4];
        if (!(ss >> v[0] >> v[1] >> v[2] >> v[3])) {
            throw IoError(file.string() + ":" + std::to_string(lineno) + ": expected x,y,w,h");
        }
        boxes.push_back({v[0] / width, v[1] / height, v[2] / width, v[3] / height});
    }
    return boxes;
}

void write_sequence(const std::filesystem::path& dir, const Sequence& seq) {
    if (seq.frames.size() != seq.boxes.size()) throw std::invalid_argument("write_sequence: frame/box count mismatch");
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) write_ppm(dir / frame_name(i), seq.frames[i]);
    const int w = seq.frames.empty() ? 1 : seq.frames[0].width;
    const int h = seq.frames.empty() ? 1 : seq.frames[0].height;
    write_boxes(dir / "groundtruth.txt", seq.boxes, w, h);
}

Sequence read_sequence(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a sequence directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .ppm frames in " + dir.string());
    Sequence seq;
    for (const auto& f : files) seq.frames.push_back(read_ppm(f));
    const auto gt = dir / "groundtruth.txt";
    if (std::filesystem::exists(gt)) {
        seq.boxes = read_boxes(gt, seq.frames[0].width, seq.frames[0].height);
        if (seq.boxes.size() != seq.frames.size()) {
            throw IoError(gt.string() + ": " + std::to_string(seq.boxes.size()) + " boxes for " +
                          std::to_string(seq.frames.size()) + " frames");
        }
    }
    return seq;
}

}  // namespace ctxtrack
