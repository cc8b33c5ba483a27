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
#include <vector>

#include "omniunet/error.hpp"

namespace omniunet {

// Per-pixel class indices, [N,H,W] row-major.
struct LabelMask {
    std::int64_t batch = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<std::uint8_t> labels;

    LabelMask() = default;
    LabelMask(std::int64_t n, std::int64_t h, std::int64_t w, std::uint8_t fill = 0)
        : batch(n), height(h), width(w), labels(static_cast<std::size_t>(n * h * w), fill) {}

    std::int64_t pixel_count() const { return batch * height * width; }
    std::uint8_t& at(std::int64_t n, std::int64_t y, std::int64_t x) {
        return labels[static_cast<std::size_t>((n * height + y) * width + x)];
    }
    std::uint8_t at(std::int64_t n, std::int64_t y, std::int64_t x) const {
        return labels[static_cast<std::size_t>((n * height + y) * width + x)];
    }
    bool same_extent(const LabelMask& other) const {
        return batch == other.batch && height == other.height && width == other.width;
    }
};

}  // namespace omniunet
