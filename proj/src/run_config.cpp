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

#include "omniunet/run_config.hpp"

#include <fstream>

#include "omniunet/error.hpp"

namespace omniunet {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    model.validate();
    train.validate();
}

json run_config_to_json(const RunConfig& c) {
    return {{"manifest", c.manifest.string()}, {"model", c.model}, {"train", c.train}};
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (key != "manifest" && key != "model" && key != "train") throw ConfigError("unknown config section '" + key + "'");
    }
    RunConfig c;
    try {
        const json model = j.value("model", json::object());
        const std::string preset = model.value("preset", std::string("default"));
        if (preset == "tiny") {
            c.model = ModelConfig::tiny();
        } else if (preset != "default") {
            throw ConfigError("unknown model preset '" + preset + "' (default, tiny)");
        }
        json merged = c.model;
        for (const auto& [key, value] : model.items()) {
            if (key == "preset") continue;
            if (!merged.contains(key)) throw ConfigError("unknown model key '" + key + "'");
            merged[key] = value;
        }
        c.model = merged.get<ModelConfig>();

        json train = c.train;
        const json train_in = j.value("train", json::object());
        for (const auto& [key, value] : train_in.items()) {
            if (!train.contains(key)) throw ConfigError("unknown train key '" + key + "'");
            if (key == "optimizer") {
                for (const auto& [k2, v2] : value.items()) {
                    if (!train["optimizer"].contains(k2)) throw ConfigError("unknown optimizer key '" + k2 + "'");
                    train["optimizer"][k2] = v2;
                }
            } else {
                train[key] = value;
            }
        }
        c.train = train.get<TrainConfig>();
        if (j.contains("manifest") && !j.at("manifest").get<std::string>().empty()) {
            fs::path m = j.at("manifest").get<std::string>();
            c.manifest = m.is_relative() && !base_dir.empty() ? base_dir / m : m;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

json load_config_json(const fs::path& path, const std::vector<std::string>& overrides) {
    json j = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config " + path.string());
        try {
            j = json::parse(in, nullptr, true, true);
        } catch (const json::exception& e) {
            throw ConfigError("config " + path.string() + ": " + e.what());
        }
    }
    for (const auto& o : overrides) apply_override(j, o);
    return j;
}

}  // namespace omniunet
