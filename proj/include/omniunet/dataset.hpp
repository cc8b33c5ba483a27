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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "omniunet/class_set.hpp"
#include "omniunet/label_mask.hpp"
#include "omniunet/tensor.hpp"

namespace omniunet {

inline constexpr int kInputChannels = 5;  // R, G, B, depth, thermal

// Per-dataset scaling of the depth and thermal planes into [0, 1], followed by
// per-channel standardization (x - mean) / std.
struct Normalization {
    double depth_max_m = 10.0;
    double thermal_min_c = -20.0;
    double thermal_max_c = 60.0;
    std::array<double, kInputChannels> mean{0.0, 0.0, 0.0, 0.0, 0.0};
    std::array<double, kInputChannels> stddev{1.0, 1.0, 1.0, 1.0, 1.0};

    void validate() const;  // ConfigError on degenerate bounds
};

nlohmann::json normalization_to_json(const Normalization& n);
Normalization normalization_from_json(const nlohmann::json& j);

struct ManifestEntry {
    std::string id;
    std::filesystem::path rgb;
    std::filesystem::path depth;
    std::filesystem::path thermal;
    std::optional<std::filesystem::path> label;
};

// Line-delimited JSON: a header line with the class set and normalization,
// then one entry per line. Entry paths are relative to the manifest file.
struct DatasetManifest {
    ClassSet classes = ClassSet::baseprod();
    Normalization normalization;
    std::vector<ManifestEntry> entries;  // paths resolved to absolute
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct MultimodalFrame {
    std::string id;
    int height = 0;
    int width = 0;
    std::vector<float> rgb;      // H*W*3 in [0, 1]
    std::vector<float> depth;    // meters, 0 = no return
    std::vector<float> thermal;  // degrees Celsius
    std::optional<std::vector<std::uint8_t>> label;
};

// Raw plane encodings.
inline double depth_from_raw(std::uint16_t mm) { return mm / 1000.0; }
inline double thermal_from_raw(std::uint16_t deci_kelvin) { return deci_kelvin / 10.0 - 273.15; }
std::uint16_t depth_to_raw(double meters);
std::uint16_t thermal_to_raw(double celsius);

MultimodalFrame load_frame(const ManifestEntry& entry, const ClassSet& classes);

// [5,H,W] network input.
Tensor<float> normalize(const MultimodalFrame& frame, const Normalization& norm);

// Deterministic shuffle by seed; the first ceil(ratio * n) entries train.
template <typename E>
std::pair<std::vector<E>, std::vector<E>> split_dataset(const std::vector<E>& entries, double ratio,
                                                        std::uint64_t seed);

// Fisher-Yates permutation of [0, n) from mt19937_64(seed).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

// Index groups for one epoch, reshuffled per (seed, epoch); the last group
// may be short.
std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch);

// A frame ready for the network.
struct Sample {
    std::string id;
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<float> input;          // [5,H,W]
    std::vector<std::uint8_t> labels;  // [H,W], empty when unlabeled
};

Sample make_sample(const MultimodalFrame& frame, const Normalization& norm);
std::vector<Sample> load_samples(const DatasetManifest& manifest, const std::vector<ManifestEntry>& entries);

struct Batch {
    std::vector<std::string> ids;
    Tensor<float> inputs;  // [N,5,H,W]
    LabelMask labels;      // [N,H,W]
};

// Stacks `indices` of `samples`; every sample must be labeled and share extents.
Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);

// Replaces one input channel with zeros (modality ablation).
void zero_input_channel(std::vector<Sample>& samples, int channel);

struct DatasetReport {
    std::size_t entries = 0;
    std::size_t labeled = 0;
    std::vector<std::string> errors;          // one line per failed entry
    std::vector<std::uint64_t> class_pixels;  // over labeled frames
    std::optional<std::pair<int, int>> extent;  // shared H, W when uniform

    bool ok() const { return errors.empty(); }
};

// Loads every entry and checks the frame invariants; never throws for
// per-entry problems, they are collected in `errors`.
DatasetReport validate_dataset(const DatasetManifest& manifest);
std::string format_dataset_report(const DatasetReport& report, const ClassSet& classes);

}  // namespace omniunet
