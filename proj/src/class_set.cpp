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

#include "omniunet/class_set.hpp"

#include <algorithm>
#include <set>

#include "omniunet/error.hpp"

namespace omniunet {

ClassSet::ClassSet(std::vector<std::string> names, std::vector<Color> palette, int void_index)
    : names_(std::move(names)), palette_(std::move(palette)), void_index_(void_index) {
    if (names_.empty()) throw ConfigError("class set is empty");
    if (names_.size() > 256) throw ConfigError("class set has more than 256 classes");
    if (names_.size() != palette_.size()) {
        throw ConfigError("class set has " + std::to_string(names_.size()) + " names but " +
                          std::to_string(palette_.size()) + " palette colors");
    }
    if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size()) {
        throw ConfigError("class names must be unique");
    }
    if (std::set<Color>(palette_.begin(), palette_.end()).size() != palette_.size()) {
        throw ConfigError("palette colors must be unique");
    }
    if (void_index_ < 0 || void_index_ >= size()) {
        throw ConfigError("void_index " + std::to_string(void_index_) + " out of range");
    }
}

ClassSet ClassSet::baseprod() {
    return ClassSet({"void", "compact", "grass", "bedrock", "sandy", "gravel", "rock", "bush"},
                    {Color{0, 0, 0}, Color{150, 120, 90}, Color{60, 180, 75}, Color{110, 110, 120},
                     Color{240, 200, 110}, Color{200, 160, 40}, Color{70, 50, 160}, Color{20, 100, 30}},
                    0);
}

std::optional<int> ClassSet::index_of(const Color& color) const {
    auto it = std::find(palette_.begin(), palette_.end(), color);
    if (it == palette_.end()) return std::nullopt;
    return static_cast<int>(it - palette_.begin());
}

std::optional<int> ClassSet::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<int>(it - names_.begin());
}

nlohmann::json class_set_to_json(const ClassSet& classes) {
    nlohmann::json list = nlohmann::json::array();
    for (int c = 0; c < classes.size(); ++c) {
        list.push_back({{"name", classes.name(c)}, {"color", classes.color(c)}});
    }
    return {{"classes", list}, {"void_index", classes.void_index()}};
}

ClassSet class_set_from_json(const nlohmann::json& j) {
    try {
        std::vector<std::string> names;
        std::vector<Color> palette;
        for (const auto& entry : j.at("classes")) {
            names.push_back(entry.at("name").get<std::string>());
            auto rgb = entry.at("color").get<std::vector<int>>();
            if (rgb.size() != 3 || std::any_of(rgb.begin(), rgb.end(), [](int v) { return v < 0 || v > 255; })) {
                throw ConfigError("class " + names.back() + ": color must be three values in [0, 255]");
            }
            palette.push_back(Color{static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                                    static_cast<std::uint8_t>(rgb[2])});
        }
        return ClassSet(std::move(names), std::move(palette), j.value("void_index", 0));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed class set: ") + e.what());
    }
}

}  // namespace omniunet
