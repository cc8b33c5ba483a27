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

#include "omniunet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "omniunet/error.hpp"
#include "omniunet/image_io.hpp"

namespace omniunet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestTag = "omniunet_manifest";

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint32_t pack(const Color& c) { return (std::uint32_t{c[0]} << 16) | (std::uint32_t{c[1]} << 8) | c[2]; }

}  // namespace

void Normalization::validate() const {
    if (!(depth_max_m > 0.0)) throw ConfigError("normalization: depth_max_m must be > 0");
    if (!(thermal_min_c < thermal_max_c)) {
        throw ConfigError("normalization: thermal_min_c must be below thermal_max_c");
    }
    for (int c = 0; c < kInputChannels; ++c) {
        if (!(stddev[static_cast<std::size_t>(c)] > 0.0)) {
            throw ConfigError("normalization: std of channel " + std::to_string(c) + " must be > 0");
        }
    }
}

json normalization_to_json(const Normalization& n) {
    return {{"depth_max_m", n.depth_max_m},
            {"thermal_min_c", n.thermal_min_c},
            {"thermal_max_c", n.thermal_max_c},
            {"mean", n.mean},
            {"std", n.stddev}};
}

Normalization normalization_from_json(const json& j) {
    Normalization n;
    n.depth_max_m = j.value("depth_max_m", n.depth_max_m);
    n.thermal_min_c = j.value("thermal_min_c", n.thermal_min_c);
    n.thermal_max_c = j.value("thermal_max_c", n.thermal_max_c);
    if (j.contains("mean")) n.mean = j.at("mean").get<std::array<double, kInputChannels>>();
    if (j.contains("std")) n.stddev = j.at("std").get<std::array<double, kInputChannels>>();
    n.validate();
    return n;
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    const fs::path root = fs::absolute(path).parent_path();
    DatasetManifest m;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
        try {
            if (!have_header) {
                if (!j.contains(kManifestTag)) throw DataError(where + ": missing manifest header line");
                m.classes = j.contains("classes") ? class_set_from_json(j) : ClassSet::baseprod();
                m.normalization = normalization_from_json(j.value("normalization", json::object()));
                have_header = true;
                continue;
            }
            ManifestEntry e;
            e.id = j.at("id").get<std::string>();
            if (!ids.insert(e.id).second) throw DataError(where + ": duplicate id " + e.id);
            e.rgb = root / j.at("rgb").get<std::string>();
            e.depth = root / j.at("depth").get<std::string>();
            e.thermal = root / j.at("thermal").get<std::string>();
            if (j.contains("label") && !j.at("label").is_null()) e.label = root / j.at("label").get<std::string>();
            m.entries.push_back(std::move(e));
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    if (!have_header) throw DataError("manifest " + path.string() + " is empty");
    return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    const fs::path root = fs::absolute(path).parent_path();
    std::ofstream out(path);
    if (!out) throw DataError("cannot create manifest " + path.string());
    json header = class_set_to_json(manifest.classes);
    header[kManifestTag] = 1;
    header["normalization"] = normalization_to_json(manifest.normalization);
    out << header.dump() << '\n';
    auto rel = [&](const fs::path& p) { return fs::absolute(p).lexically_relative(root).generic_string(); };
    for (const auto& e : manifest.entries) {
        json j = {{"id", e.id}, {"rgb", rel(e.rgb)}, {"depth", rel(e.depth)}, {"thermal", rel(e.thermal)}};
        if (e.label) j["label"] = rel(*e.label);
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::uint16_t depth_to_raw(double meters) {
    return static_cast<std::uint16_t>(std::clamp(std::lround(meters * 1000.0), 0L, 65535L));
}

std::uint16_t thermal_to_raw(double celsius) {
    return static_cast<std::uint16_t>(std::clamp(std::lround((celsius + 273.15) * 10.0), 0L, 65535L));
}

MultimodalFrame load_frame(const ManifestEntry& entry, const ClassSet& classes) {
    MultimodalFrame f;
    f.id = entry.id;
    try {
        const RgbImage rgb = read_rgb_png(entry.rgb);
        const Gray16Image depth = read_gray16_png(entry.depth);
        const Gray16Image thermal = read_gray16_png(entry.thermal);
        auto same = [&](int w, int h, const char* what) {
            if (w != rgb.width || h != rgb.height) {
                throw DataError(std::string(what) + " is " + std::to_string(w) + "x" + std::to_string(h) +
                                " but rgb is " + std::to_string(rgb.width) + "x" + std::to_string(rgb.height));
            }
        };
        same(depth.width, depth.height, "depth");
        same(thermal.width, thermal.height, "thermal");
        f.width = rgb.width;
        f.height = rgb.height;
        const std::size_t n = static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height);
        f.rgb.resize(n * 3);
        for (std::size_t i = 0; i < n * 3; ++i) f.rgb[i] = static_cast<float>(rgb.pixels[i] / 255.0);
        f.depth.resize(n);
        f.thermal.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            f.depth[i] = static_cast<float>(depth_from_raw(depth.pixels[i]));
            f.thermal[i] = static_cast<float>(thermal_from_raw(thermal.pixels[i]));
        }
        if (entry.label) {
            const RgbImage lab = read_rgb_png(*entry.label);
            same(lab.width, lab.height, "label");
            std::unordered_map<std::uint32_t, std::uint8_t> lookup;
            for (int c = 0; c < classes.size(); ++c) lookup[pack(classes.color(c))] = static_cast<std::uint8_t>(c);
            std::vector<std::uint8_t> labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                const Color px{lab.pixels[3 * i], lab.pixels[3 * i + 1], lab.pixels[3 * i + 2]};
                auto it = lookup.find(pack(px));
                if (it == lookup.end()) {
                    throw DataError("label pixel (" + std::to_string(i % static_cast<std::size_t>(f.width)) + ", " +
                                    std::to_string(i / static_cast<std::size_t>(f.width)) + ") has color (" +
                                    std::to_string(px[0]) + "," + std::to_string(px[1]) + "," +
                                    std::to_string(px[2]) + ") outside the palette");
                }
                labels[i] = it->second;
            }
            f.label = std::move(labels);
        }
    } catch (const DataError& e) {
        throw DataError("frame '" + entry.id + "': " + e.what());
    }
    return f;
}

Tensor<float> normalize(const MultimodalFrame& frame, const Normalization& norm) {
    norm.validate();
    const std::size_t n = static_cast<std::size_t>(frame.width) * static_cast<std::size_t>(frame.height);
    std::vector<float> out(n * kInputChannels);
    auto standardize = [&](int c, double v) {
        return static_cast<float>((v - norm.mean[static_cast<std::size_t>(c)]) / norm.stddev[static_cast<std::size_t>(c)]);
    };
    const double span = norm.thermal_max_c - norm.thermal_min_c;
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) out[c * n + i] = standardize(c, frame.rgb[3 * i + static_cast<std::size_t>(c)]);
        const double d = frame.depth[i] > 0.0f ? std::clamp(frame.depth[i] / norm.depth_max_m, 0.0, 1.0) : 0.0;
        out[3 * n + i] = standardize(3, d);
        out[4 * n + i] = standardize(4, std::clamp((frame.thermal[i] - norm.thermal_min_c) / span, 0.0, 1.0));
    }
    return Tensor<float>({kInputChannels, frame.height, frame.width}, std::move(out));
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Explicit Fisher-Yates: std::shuffle's draw sequence is library specific.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

template <typename E>
std::pair<std::vector<E>, std::vector<E>> split_dataset(const std::vector<E>& entries, double ratio,
                                                        std::uint64_t seed) {
    if (entries.empty()) throw DataError("cannot split an empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
    const std::size_t n = entries.size();
    // The small tolerance keeps 0.8 * 10 at 8 despite rounding.
    const auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
    const auto order = shuffled_indices(n, splitmix64(seed));
    std::pair<std::vector<E>, std::vector<E>> out;
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? out.first : out.second).push_back(entries[order[i]]);
    return out;
}

std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch) {
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    const auto order = shuffled_indices(n, splitmix64(seed ^ splitmix64(epoch + 1)));
    std::vector<std::vector<std::size_t>> plan;
    for (std::size_t i = 0; i < n; i += batch_size) {
        plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                          order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
    }
    return plan;
}

Sample make_sample(const MultimodalFrame& frame, const Normalization& norm) {
    Sample s;
    s.id = frame.id;
    s.height = frame.height;
    s.width = frame.width;
    const auto t = normalize(frame, norm);
    s.input.assign(t.values().begin(), t.values().end());
    if (frame.label) s.labels = *frame.label;
    return s;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, const std::vector<ManifestEntry>& entries) {
    std::vector<Sample> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(make_sample(load_frame(e, manifest.classes), manifest.normalization));
    return out;
}

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw DataError("empty batch");
    const Sample& first = samples.at(indices.front());
    const std::int64_t h = first.height, w = first.width;
    const std::size_t plane = static_cast<std::size_t>(h * w);
    Batch b;
    b.labels = LabelMask(static_cast<std::int64_t>(indices.size()), h, w);
    std::vector<float> x;
    x.reserve(indices.size() * plane * kInputChannels);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Sample& s = samples.at(indices[k]);
        if (s.height != h || s.width != w) {
            throw DataError("frame '" + s.id + "' is " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                            ", batch extent is " + std::to_string(h) + "x" + std::to_string(w));
        }
        if (s.labels.size() != plane) throw DataError("frame '" + s.id + "' has no label");
        x.insert(x.end(), s.input.begin(), s.input.end());
        std::copy(s.labels.begin(), s.labels.end(), b.labels.labels.begin() + static_cast<std::ptrdiff_t>(k * plane));
        b.ids.push_back(s.id);
    }
    b.inputs = Tensor<float>({static_cast<std::int64_t>(indices.size()), kInputChannels, h, w}, std::move(x));
    return b;
}

void zero_input_channel(std::vector<Sample>& samples, int channel) {
    if (channel < 0 || channel >= kInputChannels) throw ConfigError("no input channel " + std::to_string(channel));
    for (auto& s : samples) {
        const auto plane = static_cast<std::size_t>(s.height * s.width);
        std::fill_n(s.input.begin() + static_cast<std::ptrdiff_t>(channel * plane), plane, 0.0f);
    }
}

DatasetReport validate_dataset(const DatasetManifest& manifest) {
    DatasetReport r;
    r.entries = manifest.entries.size();
    r.class_pixels.assign(static_cast<std::size_t>(manifest.classes.size()), 0);
    bool uniform = true;
    for (const auto& e : manifest.entries) {
        try {
            const MultimodalFrame f = load_frame(e, manifest.classes);
            for (float d : f.depth) {
                if (!(d >= 0.0f)) throw DataError("frame '" + e.id + "': negative depth");
            }
            if (!r.extent) {
                r.extent = std::pair{f.height, f.width};
            } else if (*r.extent != std::pair{f.height, f.width}) {
                uniform = false;
            }
            if (f.label) {
                ++r.labeled;
                for (auto v : *f.label) ++r.class_pixels[v];
            }
        } catch (const Error& err) {
            r.errors.emplace_back(err.what());
        }
    }
    if (!uniform) r.extent.reset();
    if (manifest.entries.empty()) r.errors.emplace_back("manifest lists no frames");
    return r;
}

std::string format_dataset_report(const DatasetReport& report, const ClassSet& classes) {
    std::ostringstream out;
    out << "frames: " << report.entries << " (" << report.labeled << " labeled)\n";
    if (report.extent) out << "extent: " << report.extent->first << "x" << report.extent->second << '\n';
    else out << "extent: mixed\n";
    std::uint64_t total = 0;
    for (auto v : report.class_pixels) total += v;
    out << "class pixel frequencies:\n";
    for (int c = 0; c < classes.size(); ++c) {
        const auto n = report.class_pixels[static_cast<std::size_t>(c)];
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-10s %10llu  %6.2f%%\n", classes.name(c).c_str(),
                      static_cast<unsigned long long>(n), total ? 100.0 * static_cast<double>(n) / total : 0.0);
        out << buf;
    }
    for (const auto& e : report.errors) out << "error: " << e << '\n';
    out << (report.ok() ? "OK" : "FAILED") << '\n';
    return out.str();
}

template std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split_dataset(
    const std::vector<ManifestEntry>&, double, std::uint64_t);
template std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>&, double,
                                                                           std::uint64_t);
template std::pair<std::vector<std::string>, std::vector<std::string>> split_dataset(
    const std::vector<std::string>&, double, std::uint64_t);
template std::pair<std::vector<int>, std::vector<int>> split_dataset(const std::vector<int>&, double, std::uint64_t);

}  // namespace omniunet
