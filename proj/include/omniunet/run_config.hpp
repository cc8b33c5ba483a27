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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omniunet/model_config.hpp"
#include "omniunet/trainer.hpp"

namespace omniunet {

/// Everything a run needs, merged from a JSON config file and command-line
/// overrides. File layout:
///
///   {
///     "manifest": "data/manifest.jsonl",
///     "model": {"preset": "tiny", "window_size": 4, ...},
///     "train": {"epochs": 50, "batch_size": 16, "learning_rate": 2e-5, ...}
///   }
///
/// "preset" (default or tiny) picks the base model configuration; the other
/// model keys override it. Relative manifest paths resolve against the
/// config file's directory.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::filesystem::path manifest;

    void validate() const;  // ConfigError
};

nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

// Sets a dotted key ("train.epochs=3", "model.depths=[1,1,1,1]") in `j`. The
// value is parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Reads `path` (when non-empty) and applies `overrides` in order.
nlohmann::json load_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace omniunet
