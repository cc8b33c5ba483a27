// Copyright 2026 The OmniUnet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "omniunet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "omniunet/error.hpp"
#include "omniunet/image_io.hpp"

namespace omniunet {

namespace fs = std::filesystem;

namespace {

struct Appearance {
    Color rgb;
    double depth_offset_m;
    double temperature_c;
};

// Indexed like ClassSet::baseprod().
constexpr std::array<Appearance, 8> kTerrain{{
    {{0, 0, 0}, 0.0, 0.0},           // void (unused inside the frame)
    {{140, 115, 90}, 0.0, 27.0},     // compact
    {{70, 150, 60}, 0.0, 19.0},      // grass
    {{105, 105, 112}, 0.0, 23.0},    // bedrock
    {{225, 195, 130}, 0.0, 41.0},    // sandy
    {{170, 150, 110}, 0.0, 31.0},    // gravel
    {{90, 80, 75}, -0.6, 15.0},      // rock
    {{35, 85, 35}, -0.3, 11.0},      // bush
}};

struct Planes {
    int h, w;
    std::vector<std::uint8_t> rgb;
    std::vector<double> depth;
    std::vector<double> thermal;
    std::vector<std::uint8_t> label;

    Planes(int h_, int w_)
        : h(h_), w(w_), rgb(static_cast<std::size_t>(h_ * w_ * 3)), depth(static_cast<std::size_t>(h_ * w_)),
          thermal(static_cast<std::size_t>(h_ * w_)), label(static_cast<std::size_t>(h_ * w_)) {}
};

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Depth of a flat ground plane seen from a forward camera: far at the top row.
double ground_depth(int y, int h) { return 1.5 + 6.5 * (1.0 - static_cast<double>(y) / std::max(1, h - 1)); }

Planes terrain_frame(int h, int w, std::mt19937_64& rng) {
    Planes p(h, w);
    std::uniform_int_distribution<int> cls(1, 7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    // Horizontal bands, then a few elliptical patches on top.
    std::vector<int> class_map(static_cast<std::size_t>(h * w));
    const int bands = 2 + static_cast<int>(rng() % 2);
    std::vector<int> cuts{0};
    for (int b = 1; b < bands; ++b) cuts.push_back(static_cast<int>(h * (b + 0.3 * (u(rng) - 0.5)) / bands));
    cuts.push_back(h);
    for (int b = 0; b < bands; ++b) {
        const int c = cls(rng);
        for (int y = cuts[static_cast<std::size_t>(b)]; y < cuts[static_cast<std::size_t>(b) + 1]; ++y)
            for (int x = 0; x < w; ++x) class_map[static_cast<std::size_t>(y * w + x)] = c;
    }
    const int blobs = 2 + static_cast<int>(rng() % 3);
    for (int k = 0; k < blobs; ++k) {
        const int c = cls(rng);
        const double cy = u(rng) * h, cx = u(rng) * w;
        const double ry = (0.1 + 0.15 * u(rng)) * h, rx = (0.1 + 0.2 * u(rng)) * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double dy = (y - cy) / ry, dx = (x - cx) / rx;
                if (dy * dy + dx * dx <= 1.0) class_map[static_cast<std::size_t>(y * w + x)] = c;
            }
    }
    // Void borders where the thermal field of view does not cover the color image.
    const int left = 2 + static_cast<int>(rng() % 4), right = 2 + static_cast<int>(rng() % 4);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto i = static_cast<std::size_t>(y * w + x);
            if (x < left || x >= w - right) class_map[i] = 0;
        }

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto i = static_cast<std::size_t>(y * w + x);
            const int c = class_map[i];
            p.label[i] = static_cast<std::uint8_t>(c);
            if (c == 0) {
                p.depth[i] = 0.0;
                p.thermal[i] = 0.0;
                continue;  // rgb stays black
            }
            const auto& a = kTerrain[static_cast<std::size_t>(c)];
            for (int ch = 0; ch < 3; ++ch) p.rgb[3 * i + static_cast<std::size_t>(ch)] = clamp_u8(a.rgb[static_cast<std::size_t>(ch)] + 8.0 * noise(rng));
            p.depth[i] = std::max(0.1, ground_depth(y, h) + a.depth_offset_m + 0.05 * noise(rng));
            p.thermal[i] = a.temperature_c + 0.8 * noise(rng);
        }
    return p;
}

Planes thermal_only_frame(int h, int w, int frame, std::uint64_t seed, std::mt19937_64& rng) {
    Planes p(h, w);
    // Shared texture and depth: same generator state for every frame.
    std::mt19937_64 shared(seed ^ 0x5eedULL);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < p.label.size(); ++i) {
        const int y = static_cast<int>(i) / w;
        for (int ch = 0; ch < 3; ++ch) p.rgb[3 * i + static_cast<std::size_t>(ch)] = clamp_u8(128.0 + 12.0 * noise(shared));
        p.depth[i] = ground_depth(y, h) + 0.05 * noise(shared);
    }
    constexpr int kBlock = 16;
    constexpr std::array<double, 4> temps{12.0, 22.0, 32.0, 42.0};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto i = static_cast<std::size_t>(y * w + x);
            const int slot = ((x / kBlock) + (y / kBlock) + frame) % 4;
            p.label[i] = static_cast<std::uint8_t>(kThermalOnlyClasses[static_cast<std::size_t>(slot)]);
            p.thermal[i] = temps[static_cast<std::size_t>(slot)] + 0.8 * noise(rng);
        }
    return p;
}

}  // namespace

SynthMode parse_synth_mode(const std::string& name) {
    if (name == "terrain") return SynthMode::terrain;
    if (name == "thermal_only") return SynthMode::thermal_only;
    throw ConfigError("unknown synthetic mode '" + name + "' (terrain, thermal_only)");
}

DatasetManifest generate_synthetic(const fs::path& dir, const SynthOptions& options) {
    if (options.frames < 1 || options.height < 1 || options.width < 1) {
        throw ConfigError("synthetic dataset needs at least one frame of positive extent");
    }
    for (const char* sub : {"rgb", "depth", "thermal", "label"}) fs::create_directories(dir / sub);

    DatasetManifest m;
    m.normalization.depth_max_m = 10.0;
    m.normalization.thermal_min_c = 0.0;
    m.normalization.thermal_max_c = 50.0;
    std::array<double, kInputChannels> sum{}, sum2{};
    double count = 0;

    for (int f = 0; f < options.frames; ++f) {
        std::mt19937_64 rng(options.seed * 1000003ULL + static_cast<std::uint64_t>(f));
        Planes p = options.mode == SynthMode::terrain
                       ? terrain_frame(options.height, options.width, rng)
                       : thermal_only_frame(options.height, options.width, f, options.seed, rng);
        char id[32];
        std::snprintf(id, sizeof id, "frame_%04d", f);
        ManifestEntry e{id, dir / "rgb" / (std::string(id) + ".png"), dir / "depth" / (std::string(id) + ".png"),
                        dir / "thermal" / (std::string(id) + ".png"), dir / "label" / (std::string(id) + ".png")};

        Gray16Image depth{p.w, p.h, std::vector<std::uint16_t>(p.depth.size())};
        Gray16Image thermal{p.w, p.h, std::vector<std::uint16_t>(p.thermal.size())};
        for (std::size_t i = 0; i < p.depth.size(); ++i) {
            depth.pixels[i] = depth_to_raw(p.depth[i]);
            thermal.pixels[i] = thermal_to_raw(p.thermal[i]);
        }
        write_rgb_png(e.rgb, RgbImage{p.w, p.h, p.rgb});
        write_gray16_png(e.depth, depth);
        write_gray16_png(e.thermal, thermal);
        write_indexed_png(*e.label, p.w, p.h, p.label, m.classes.palette());

        // Statistics of the scaled planes, as the network sees them before standardization.
        const Normalization& nz = m.normalization;
        for (std::size_t i = 0; i < p.label.size(); ++i) {
            std::array<double, kInputChannels> v{};
            for (int ch = 0; ch < 3; ++ch) v[static_cast<std::size_t>(ch)] = static_cast<float>(p.rgb[3 * i + static_cast<std::size_t>(ch)] / 255.0);
            const double d = depth_from_raw(depth.pixels[i]);
            v[3] = d > 0 ? std::clamp(d / nz.depth_max_m, 0.0, 1.0) : 0.0;
            v[4] = std::clamp((thermal_from_raw(thermal.pixels[i]) - nz.thermal_min_c) /
                                  (nz.thermal_max_c - nz.thermal_min_c), 0.0, 1.0);
            for (std::size_t ch = 0; ch < kInputChannels; ++ch) {
                sum[ch] += v[ch];
                sum2[ch] += v[ch] * v[ch];
            }
            count += 1;
        }
        m.entries.push_back(std::move(e));
    }
    for (std::size_t ch = 0; ch < kInputChannels; ++ch) {
        const double mean = sum[ch] / count;
        const double var = std::max(0.0, sum2[ch] / count - mean * mean);
        // Rounded so the manifest text reproduces the values exactly.
        m.normalization.mean[ch] = std::round(mean * 1e6) / 1e6;
        m.normalization.stddev[ch] = std::max(1e-3, std::round(std::sqrt(var) * 1e6) / 1e6);
    }
    save_manifest(m, dir / "manifest.jsonl");
    return m;
}

}  // namespace omniunet
