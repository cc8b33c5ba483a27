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

// Checkpoint file layout:
//
//   omniunet-checkpoint 1 <header-bytes>\n
//   <header: JSON, exactly header-bytes long>
//   <payload: float32 little-endian values, tensors back to back>
//
// The header holds "model" (ModelConfig), "classes", "normalization",
// "metadata" (free-form, e.g. epoch and validation loss), "payload_bytes",
// "payload_fnv1a" (hex FNV-1a 64 of the payload) and "tensors": a list of
// {"name", "shape", "offset"} with offsets counted in floats. Names are the
// model's parameter names (encoder.stage2.block0.attn.qkv.weight, ...).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omniunet/class_set.hpp"
#include "omniunet/dataset.hpp"
#include "omniunet/model.hpp"
#include "omniunet/model_config.hpp"

namespace omniunet {

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct Checkpoint {
    ModelConfig config;
    ClassSet classes = ClassSet::baseprod();
    Normalization normalization;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<NamedTensor> tensors;
};

std::uint64_t fnv1a64(const void* data, std::size_t size);

template <typename T>
Checkpoint make_checkpoint(const OmniUnet<T>& model, const ClassSet& classes, const Normalization& normalization,
                           nlohmann::json metadata = nlohmann::json::object());

// Written to a sibling temporary file and renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
// CheckpointError on a malformed, truncated or corrupted file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies tensors into the model; names and shapes must match its parameters
// one to one (CheckpointError otherwise).
template <typename T>
void load_parameters(OmniUnet<T>& model, const Checkpoint& checkpoint);

// Builds a model from the embedded configuration and restores its parameters.
OmniUnet<float> restore_model(const Checkpoint& checkpoint);

}  // namespace omniunet
