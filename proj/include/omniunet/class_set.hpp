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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace omniunet {

using Color = std::array<std::uint8_t, 3>;

// Ordered class names with one palette color each; `void_index` marks the
// background class that Dice loss and mean metrics leave out.
class ClassSet {
public:
    ClassSet(std::vector<std::string> names, std::vector<Color> palette, int void_index = 0);

    // void, compact, grass, bedrock, sandy, gravel, rock, bush.
    static ClassSet baseprod();

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int c) const { return names_.at(static_cast<std::size_t>(c)); }
    const Color& color(int c) const { return palette_.at(static_cast<std::size_t>(c)); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Color>& palette() const { return palette_; }
    int void_index() const { return void_index_; }

    std::optional<int> index_of(const Color& color) const;
    std::optional<int> index_of(const std::string& name) const;

    bool operator==(const ClassSet&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<Color> palette_;
    int void_index_ = 0;
};

nlohmann::json class_set_to_json(const ClassSet& classes);
ClassSet class_set_from_json(const nlohmann::json& j);

}  // namespace omniunet
