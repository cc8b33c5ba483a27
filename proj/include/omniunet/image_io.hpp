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

// Lossless PNG codecs for the frame planes: 8-bit RGB color, 16-bit
// single-plane depth/thermal and palette-indexed label masks.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace omniunet {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, interleaved RGB
};

struct Gray16Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> pixels;
};

// Any 8-bit PNG (gray, RGB, palette, with or without alpha) expanded to RGB.
// Alpha is dropped. 16-bit color input is rejected.
RgbImage read_rgb_png(const std::filesystem::path& path);
// 16-bit single-channel PNG only.
Gray16Image read_gray16_png(const std::filesystem::path& path);

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);
void write_gray16_png(const std::filesystem::path& path, const Gray16Image& image);
// One byte per pixel indexing `palette`; written as a PLTE image so viewers
// show the class colors.
void write_indexed_png(const std::filesystem::path& path, int width, int height,
                       const std::vector<std::uint8_t>& indices,
                       const std::vector<std::array<std::uint8_t, 3>>& palette);

}  // namespace omniunet
