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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "omniunet/dataset.hpp"
#include "omniunet/error.hpp"
#include "omniunet/image_io.hpp"
#include "omniunet/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace omniunet;
namespace fs = std::filesystem;
using omniunet::testing::TempDir;

namespace {

// Writes a 2x3 frame whose planes are constant; returns its entry.
ManifestEntry write_frame(const fs::path& dir, const std::string& id, std::uint16_t depth_raw,
                          std::uint16_t thermal_raw, std::uint8_t label, int w = 3, int h = 2) {
    ManifestEntry e{id, dir / (id + "_rgb.png"), dir / (id + "_d.png"), dir / (id + "_t.png"), dir / (id + "_l.png")};
    write_rgb_png(e.rgb, RgbImage{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h * 3), 51)});
    write_gray16_png(e.depth, Gray16Image{w, h, std::vector<std::uint16_t>(static_cast<std::size_t>(w * h), depth_raw)});
    write_gray16_png(e.thermal,
                     Gray16Image{w, h, std::vector<std::uint16_t>(static_cast<std::size_t>(w * h), thermal_raw)});
    write_indexed_png(*e.label, w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h), label),
                      ClassSet::baseprod().palette());
    return e;
}

}  // namespace

TEST_CASE("png round trips") {
    TempDir tmp;
    RgbImage rgb{3, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 250, 251, 252, 0, 0, 255}};
    write_rgb_png(tmp / "a.png", rgb);
    auto back = read_rgb_png(tmp / "a.png");
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.pixels == rgb.pixels);

    Gray16Image g{2, 2, {0, 2981, 65535, 256}};
    write_gray16_png(tmp / "g.png", g);
    CHECK(read_gray16_png(tmp / "g.png").pixels == g.pixels);

    auto palette = ClassSet::baseprod().palette();
    write_indexed_png(tmp / "l.png", 2, 1, {4, 7}, palette);
    auto lab = read_rgb_png(tmp / "l.png");
    CHECK(lab.pixels == std::vector<std::uint8_t>{palette[4][0], palette[4][1], palette[4][2], palette[7][0],
                                                  palette[7][1], palette[7][2]});

    CHECK_THROWS_AS(read_rgb_png(tmp / "g.png"), DataError);
    CHECK_THROWS_AS(read_gray16_png(tmp / "a.png"), DataError);
    CHECK_THROWS_AS(write_indexed_png(tmp / "bad.png", 1, 1, {9}, palette), DataError);
    std::ofstream(tmp / "junk.png") << "not a png";
    CHECK_THROWS_AS(read_rgb_png(tmp / "junk.png"), DataError);
    try {
        read_rgb_png(tmp / "missing.png");
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("missing.png") != std::string::npos);
    }
}

TEST_CASE("unit conversions") {
    CHECK(depth_from_raw(2000) == 2.0);
    CHECK(thermal_from_raw(2981) == doctest::Approx(24.95).epsilon(1e-12));
    CHECK(depth_to_raw(2.0) == 2000);
    CHECK(thermal_to_raw(24.95) == 2981);
    CHECK(thermal_to_raw(-20.0) == 2532);
    CHECK(thermal_to_raw(900.0) == 11732);
}

TEST_CASE("load_frame") {
    TempDir tmp;
    const auto classes = ClassSet::baseprod();
    auto e = write_frame(tmp.path(), "f0", 2000, 2981, 4);
    auto f = load_frame(e, classes);
    CHECK(f.height == 2);
    CHECK(f.width == 3);
    CHECK(f.depth[0] == doctest::Approx(2.0));
    CHECK(f.thermal[0] == doctest::Approx(24.95).epsilon(1e-6));
    CHECK(f.rgb[0] == doctest::Approx(0.2));
    REQUIRE(f.label.has_value());
    CHECK(f.label->at(5) == 4);

    auto expect_error = [&](const ManifestEntry& entry, const std::string& needle) {
        try {
            load_frame(entry, classes);
            FAIL("expected an error");
        } catch (const DataError& err) {
            const std::string msg = err.what();
            CHECK(msg.find("'" + entry.id + "'") != std::string::npos);
            CHECK(msg.find(needle) != std::string::npos);
        }
    };
    SUBCASE("unknown palette color") {
        auto bad = e;
        bad.id = "odd_color";
        bad.label = tmp / "odd.png";
        write_rgb_png(*bad.label, RgbImage{3, 2, std::vector<std::uint8_t>(18, 7)});
        expect_error(bad, "palette");
    }
    SUBCASE("extent mismatch") {
        auto bad = e;
        bad.id = "mismatch";
        bad.thermal = tmp / "t_small.png";
        write_gray16_png(bad.thermal, Gray16Image{2, 2, std::vector<std::uint16_t>(4, 3000)});
        expect_error(bad, "thermal");
    }
    SUBCASE("missing file") {
        auto bad = e;
        bad.id = "gone";
        bad.depth = tmp / "nope.png";
        expect_error(bad, "nope.png");
    }
    SUBCASE("unlabeled") {
        auto plain = e;
        plain.label.reset();
        CHECK_FALSE(load_frame(plain, classes).label.has_value());
    }
}

TEST_CASE("normalize") {
    MultimodalFrame f;
    f.height = 1;
    f.width = 4;
    f.rgb = {0.5f, 0.25f, 1.0f, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    f.depth = {2.0f, 0.0f, 25.0f, 5.0f};
    f.thermal = {-20.0f, 60.0f, 100.0f, -40.0f};
    Normalization n;
    n.depth_max_m = 10.0;
    n.thermal_min_c = -20.0;
    n.thermal_max_c = 60.0;
    auto x = normalize(f, n);
    CHECK(x.shape() == Shape{5, 1, 4});
    auto v = x.values();
    CHECK(v[0] == 0.5f);
    CHECK(v[4] == 0.25f);
    CHECK(v[8] == 1.0f);
    CHECK(v[12] == doctest::Approx(0.2));  // 2 m of 10
    CHECK(v[13] == 0.0f);                  // no return
    CHECK(v[14] == 1.0f);                  // clamped
    CHECK(v[16] == 0.0f);                  // at tmin
    CHECK(v[17] == 1.0f);                  // at tmax
    CHECK(v[18] == 1.0f);
    CHECK(v[19] == 0.0f);

    n.mean[3] = 0.1;
    n.stddev[3] = 0.5;
    CHECK(normalize(f, n).values()[12] == doctest::Approx((0.2 - 0.1) / 0.5));

    Normalization bad = n;
    bad.thermal_max_c = bad.thermal_min_c;
    CHECK_THROWS_AS(normalize(f, bad), ConfigError);
    bad = n;
    bad.depth_max_m = 0;
    CHECK_THROWS_AS(normalize(f, bad), ConfigError);
}

TEST_CASE("split_dataset") {
    std::vector<int> ten{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto [train, val] = split_dataset(ten, 0.8, 3);
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);
    std::set<int> all(train.begin(), train.end());
    all.insert(val.begin(), val.end());
    CHECK(all.size() == 10);

    auto again = split_dataset(ten, 0.8, 3);
    CHECK(again.first == train);
    CHECK(split_dataset(ten, 0.8, 4).first != train);

    std::vector<int> labeled(950);
    for (int i = 0; i < 950; ++i) labeled[static_cast<std::size_t>(i)] = i;
    auto [t950, v950] = split_dataset(labeled, 0.8, 0);
    CHECK(t950.size() == 760);
    CHECK(v950.size() == 190);

    CHECK(split_dataset(std::vector<int>{1, 2, 3}, 0.5, 0).first.size() == 2);
    CHECK_THROWS_AS(split_dataset(std::vector<int>{}, 0.8, 0), DataError);
    CHECK_THROWS_AS(split_dataset(ten, 1.0, 0), ConfigError);
    CHECK_THROWS_AS(split_dataset(ten, 0.0, 0), ConfigError);
}

TEST_CASE("batch_plan") {
    auto plan = batch_plan(10, 4, 1, 0);
    REQUIRE(plan.size() == 3);
    CHECK(plan[0].size() == 4);
    CHECK(plan[1].size() == 4);
    CHECK(plan[2].size() == 2);
    std::multiset<std::size_t> seen;
    for (const auto& b : plan) seen.insert(b.begin(), b.end());
    CHECK(seen == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

    auto flat = [](const std::vector<std::vector<std::size_t>>& p) {
        std::vector<std::size_t> out;
        for (const auto& b : p) out.insert(out.end(), b.begin(), b.end());
        return out;
    };
    const auto e0 = flat(plan), e1 = flat(batch_plan(10, 4, 1, 1));
    int moved = 0;
    for (std::size_t i = 0; i < 10; ++i) moved += e0[i] != e1[i];
    CHECK(moved >= 3);
    CHECK(flat(batch_plan(10, 4, 1, 0)) == e0);
    CHECK(batch_plan(3, 16, 0, 0).size() == 1);
    CHECK_THROWS_AS(batch_plan(3, 0, 0, 0), ConfigError);
}

TEST_CASE("manifest") {
    TempDir tmp;
    DatasetManifest m;
    m.normalization.thermal_min_c = 5;
    m.normalization.mean = {0.1, 0.2, 0.3, 0.4, 0.5};
    m.entries.push_back(write_frame(tmp.path(), "a", 1000, 3000, 1));
    auto b = write_frame(tmp.path(), "b", 1500, 3000, 2);
    b.label.reset();
    m.entries.push_back(b);
    save_manifest(m, tmp / "manifest.jsonl");

    auto loaded = load_manifest(tmp / "manifest.jsonl");
    CHECK(loaded.classes == m.classes);
    CHECK(loaded.normalization.thermal_min_c == 5);
    CHECK(loaded.normalization.mean == m.normalization.mean);
    REQUIRE(loaded.entries.size() == 2);
    CHECK(fs::equivalent(loaded.entries[0].rgb, m.entries[0].rgb));
    CHECK_FALSE(loaded.entries[1].label.has_value());

    // Paths are stored relative to the manifest, so the tree can move.
    std::ifstream in(tmp / "manifest.jsonl");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(first.find(tmp.path().string()) == std::string::npos);

    SUBCASE("errors") {
        try {
            load_manifest(tmp / "absent.jsonl");
            FAIL("expected an error");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("absent.jsonl") != std::string::npos);
        }
        std::ofstream(tmp / "noheader.jsonl") << first << '\n';
        CHECK_THROWS_AS(load_manifest(tmp / "noheader.jsonl"), DataError);
        std::ofstream(tmp / "dup.jsonl") << header << '\n' << first << '\n' << first << '\n';
        CHECK_THROWS_AS(load_manifest(tmp / "dup.jsonl"), DataError);
        std::ofstream(tmp / "badnorm.jsonl")
            << R"({"omniunet_manifest":1,"normalization":{"thermal_min_c":10,"thermal_max_c":10}})" << '\n';
        CHECK_THROWS_AS(load_manifest(tmp / "badnorm.jsonl"), ConfigError);
    }
}

TEST_CASE("samples and batches") {
    TempDir tmp;
    DatasetManifest m;
    m.entries = {write_frame(tmp.path(), "a", 1000, 3000, 1), write_frame(tmp.path(), "b", 2000, 3100, 2),
                 write_frame(tmp.path(), "c", 2000, 3100, 3, 4, 2)};
    auto samples = load_samples(m, m.entries);
    auto twice = load_samples(m, m.entries);
    CHECK(samples[1].input == twice[1].input);

    auto batch = make_batch(samples, {1, 0});
    CHECK(batch.inputs.shape() == Shape{2, 5, 2, 3});
    CHECK(batch.ids == std::vector<std::string>{"b", "a"});
    CHECK(batch.labels.at(0, 0, 0) == 2);
    CHECK(batch.labels.at(1, 1, 2) == 1);
    CHECK(batch.inputs.values()[3 * 6] == doctest::Approx(0.2f));

    CHECK_THROWS_AS(make_batch(samples, {0, 2}), DataError);
    samples[0].labels.clear();
    CHECK_THROWS_AS(make_batch(samples, {0}), DataError);

    zero_input_channel(samples, 4);
    for (std::size_t i = 4 * 6; i < 5 * 6; ++i) CHECK(samples[1].input[i] == 0.0f);
    CHECK(samples[1].input[0] != 0.0f);
}

TEST_CASE("synthetic terrain") {
    TempDir tmp;
    SynthOptions opt;
    opt.frames = 3;
    opt.seed = 4;
    auto m = generate_synthetic(tmp.path(), opt);
    auto reloaded = load_manifest(tmp / "manifest.jsonl");
    CHECK(reloaded.entries.size() == 3);
    CHECK(reloaded.normalization.mean == m.normalization.mean);

    auto report = validate_dataset(reloaded);
    CHECK(report.ok());
    CHECK(report.labeled == 3);
    REQUIRE(report.extent.has_value());
    CHECK(*report.extent == std::pair{64, 64});
    std::uint64_t total = 0;
    for (auto v : report.class_pixels) total += v;
    CHECK(total == 3u * 64u * 64u);
    CHECK(report.class_pixels[0] > 0);
    const auto text = format_dataset_report(report, reloaded.classes);
    CHECK(text.find("sandy") != std::string::npos);
    CHECK(text.find("OK") != std::string::npos);

    // Void borders are black with no depth return.
    auto f = load_frame(reloaded.entries[0], reloaded.classes);
    for (std::size_t i = 0; i < f.thermal.size(); ++i) {
        if ((*f.label)[i] == 0) {
            CHECK(f.depth[i] == 0.0f);
            CHECK(f.rgb[3 * i] == 0.0f);
        }
    }
    CHECK((*f.label)[0] == 0);

    // Same seed regenerates identical files.
    TempDir other;
    generate_synthetic(other.path(), opt);
    auto a = read_rgb_png(tmp / "rgb" / "frame_0001.png");
    auto b = read_rgb_png(other / "rgb" / "frame_0001.png");
    CHECK(a.pixels == b.pixels);

    SUBCASE("broken entry is reported, not thrown") {
        fs::remove(tmp / "thermal" / "frame_0002.png");
        auto broken = validate_dataset(reloaded);
        CHECK_FALSE(broken.ok());
        REQUIRE(broken.errors.size() == 1);
        CHECK(broken.errors[0].find("frame_0002") != std::string::npos);
    }
}

TEST_CASE("synthetic sandy is warmest") {
    TempDir tmp;
    SynthOptions opt;
    opt.frames = 12;
    auto m = generate_synthetic(tmp.path(), opt);
    std::array<double, 8> heat{}, n{};
    for (const auto& e : m.entries) {
        auto f = load_frame(e, m.classes);
        for (std::size_t i = 0; i < f.thermal.size(); ++i) {
            heat[(*f.label)[i]] += f.thermal[i];
            n[(*f.label)[i]] += 1;
        }
    }
    REQUIRE(n[4] > 0);
    for (int c = 1; c < 8; ++c) {
        if (c == 4 || n[static_cast<std::size_t>(c)] == 0) continue;
        CHECK(heat[4] / n[4] > heat[static_cast<std::size_t>(c)] / n[static_cast<std::size_t>(c)] + 5.0);
    }
}

TEST_CASE("synthetic thermal_only") {
    TempDir tmp;
    SynthOptions opt;
    opt.mode = SynthMode::thermal_only;
    opt.frames = 4;
    auto m = generate_synthetic(tmp.path(), opt);
    std::vector<MultimodalFrame> frames;
    for (const auto& e : m.entries) frames.push_back(load_frame(e, m.classes));
    for (std::size_t k = 1; k < frames.size(); ++k) {
        CHECK(frames[k].rgb == frames[0].rgb);
        CHECK(frames[k].depth == frames[0].depth);
        CHECK(frames[k].thermal != frames[0].thermal);
    }
    // Every pixel holds each of the four classes exactly once across the frames.
    for (std::size_t i = 0; i < frames[0].thermal.size(); i += 37) {
        std::set<int> seen;
        for (const auto& f : frames) seen.insert((*f.label)[i]);
        CHECK(seen == std::set<int>(kThermalOnlyClasses.begin(), kThermalOnlyClasses.end()));
    }
    CHECK_THROWS_AS(parse_synth_mode("lava"), ConfigError);
    CHECK(parse_synth_mode("thermal_only") == SynthMode::thermal_only);
}
