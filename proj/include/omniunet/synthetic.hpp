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

#include <cstdint>
#include <filesystem>
#include <string>

#include "omniunet/dataset.hpp"

namespace omniunet {

enum class SynthMode {
    // Bands and blobs of the eight classes, each with its own color, depth
    // profile and temperature (sandy warmest), framed by void side borders.
    terrain,
    // Four classes that share one RGB texture and one depth map in every
    // frame and differ only in temperature. Class layout cycles per frame,
    // so without the thermal plane a pixel's class is unpredictable.
    thermal_only,
};

struct SynthOptions {
    SynthMode mode = SynthMode::terrain;
    int frames = 8;
    int height = 64;
    int width = 64;
    std::uint64_t seed = 0;
};

SynthMode parse_synth_mode(const std::string& name);

// Non-void classes of the thermal_only layout, coolest first.
inline constexpr std::array<int, 4> kThermalOnlyClasses{1, 3, 5, 4};

// Writes rgb/, depth/, thermal/, label/ PNGs and manifest.jsonl under `dir`
// and returns the manifest (also written). The manifest carries per-channel
// mean/std measured on the generated frames.
DatasetManifest generate_synthetic(const std::filesystem::path& dir, const SynthOptions& options);

}  // namespace omniunet
