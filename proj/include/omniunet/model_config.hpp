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

#include <nlohmann/json.hpp>

namespace omniunet {

inline constexpr int kNumStages = 4;

/// Architecture hyperparameters for the encoder/decoder pair.
///
/// Defaults follow the Swin-T layout (patch 4, C = 96, depths 2-2-6-2,
/// heads 3-6-12-24, window 7). `tiny()` is the desk-scale configuration used
/// throughout the tests.
struct ModelConfig {
    int in_channels = 5;
    int patch_size = 4;
    int embed_dim = 96;
    std::array<int, kNumStages> depths{2, 2, 6, 2};
    std::array<int, kNumStages> num_heads{3, 6, 12, 24};
    int window_size = 7;
    int num_classes = 8;
    double mlp_ratio = 4.0;
    // Output widths of the level-1..3 fusions, then the bottleneck.
    std::array<int, kNumStages> decoder_channels{96, 96, 192, 384};

    static ModelConfig tiny();

    int stage_dim(int stage) const { return embed_dim << stage; }
    // Input extents are padded up to a multiple of this before encoding.
    int input_multiple() const { return patch_size << (kNumStages - 1); }

    // Throws ConfigError naming the first violated invariant.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

}  // namespace omniunet
