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

#include "omniunet/model_config.hpp"

#include <string>

#include "omniunet/error.hpp"

namespace omniunet {

ModelConfig ModelConfig::tiny() {
    ModelConfig cfg;
    cfg.embed_dim = 32;
    cfg.depths = {1, 1, 1, 1};
    cfg.num_heads = {1, 2, 4, 8};
    cfg.window_size = 4;
    cfg.decoder_channels = {32, 32, 64, 128};
    return cfg;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("invalid model config: " + what); };
    if (in_channels < 1) fail("in_channels must be >= 1");
    if (patch_size < 1) fail("patch_size must be >= 1");
    if (embed_dim < 1) fail("embed_dim must be >= 1");
    if (num_classes < 1) fail("num_classes must be >= 1");
    if (num_classes > 256) fail("num_classes must be <= 256 (8-bit label masks)");
    if (!(mlp_ratio > 0.0)) fail("mlp_ratio must be positive");
    if (window_size < 1) {
        fail("window_size must be >= 1, got " + std::to_string(window_size));
    }
    for (int s = 0; s < kNumStages; ++s) {
        if (depths[s] < 1) fail("depths[" + std::to_string(s) + "] must be >= 1");
        if (num_heads[s] < 1 || stage_dim(s) % num_heads[s] != 0) {
            fail("stage " + std::to_string(s + 1) + " width " + std::to_string(stage_dim(s)) +
                 " is not divisible by num_heads " + std::to_string(num_heads[s]));
        }
        if (decoder_channels[s] < 1) fail("decoder_channels must be positive");
    }
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
    j = nlohmann::json{{"in_channels", cfg.in_channels},
                       {"patch_size", cfg.patch_size},
                       {"embed_dim", cfg.embed_dim},
                       {"depths", cfg.depths},
                       {"num_heads", cfg.num_heads},
                       {"window_size", cfg.window_size},
                       {"num_classes", cfg.num_classes},
                       {"mlp_ratio", cfg.mlp_ratio},
                       {"decoder_channels", cfg.decoder_channels}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
    ModelConfig d;
    cfg.in_channels = j.value("in_channels", d.in_channels);
    cfg.patch_size = j.value("patch_size", d.patch_size);
    cfg.embed_dim = j.value("embed_dim", d.embed_dim);
    cfg.depths = j.value("depths", d.depths);
    cfg.num_heads = j.value("num_heads", d.num_heads);
    cfg.window_size = j.value("window_size", d.window_size);
    cfg.num_classes = j.value("num_classes", d.num_classes);
    cfg.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
    cfg.decoder_channels = j.value("decoder_channels", d.decoder_channels);
}

}  // namespace omniunet
