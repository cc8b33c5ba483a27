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

#include "omniunet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "omniunet/error.hpp"

namespace omniunet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMagic = "omniunet-checkpoint";
constexpr int kVersion = 1;

static_assert(sizeof(float) == 4);

void append_le(std::string& out, float v) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

float read_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
    return std::bit_cast<float>(bits);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
Checkpoint make_checkpoint(const OmniUnet<T>& model, const ClassSet& classes, const Normalization& normalization,
                           json metadata) {
    Checkpoint c;
    c.config = model.config();
    c.classes = classes;
    c.normalization = normalization;
    c.metadata = std::move(metadata);
    for (const auto& p : model.parameters()) {
        NamedTensor t{p.name, p.tensor.shape(), {}};
        t.values.reserve(static_cast<std::size_t>(p.tensor.numel()));
        for (T v : p.tensor.values()) t.values.push_back(static_cast<float>(v));
        c.tensors.push_back(std::move(t));
    }
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
    std::string payload;
    json index = json::array();
    std::size_t offset = 0;
    for (const auto& t : checkpoint.tensors) {
        if (static_cast<std::int64_t>(t.values.size()) != shape_numel(t.shape)) {
            throw CheckpointError("tensor '" + t.name + "' does not match its shape " + shape_string(t.shape));
        }
        index.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
        for (float v : t.values) append_le(payload, v);
        offset += t.values.size();
    }
    json header;
    header["model"] = checkpoint.config;
    header["classes"] = class_set_to_json(checkpoint.classes);
    header["normalization"] = normalization_to_json(checkpoint.normalization);
    header["metadata"] = checkpoint.metadata;
    header["tensors"] = std::move(index);
    header["payload_bytes"] = payload.size();
    header["payload_fnv1a"] = hex64(fnv1a64(payload.data(), payload.size()));
    const std::string text = header.dump(1);

    const fs::path tmp = path.string() + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot create " + tmp.string());
        out << kMagic << ' ' << kVersion << ' ' << text.size() << '\n' << text;
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw CheckpointError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    const std::string where = "checkpoint " + path.string() + ": ";
    std::string first;
    if (!std::getline(in, first)) throw CheckpointError(where + "empty file");
    std::istringstream magic(first);
    std::string tag;
    int version = 0;
    std::size_t header_bytes = 0;
    if (!(magic >> tag >> version >> header_bytes) || tag != kMagic) throw CheckpointError(where + "not a checkpoint");
    if (version != kVersion) throw CheckpointError(where + "unsupported version " + std::to_string(version));
    if (header_bytes > (64u << 20)) throw CheckpointError(where + "implausible header size");
    std::string text(header_bytes, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(header_bytes))) throw CheckpointError(where + "truncated header");

    Checkpoint c;
    std::vector<unsigned char> payload;
    try {
        const json header = json::parse(text);
        c.config = header.at("model").get<ModelConfig>();
        c.classes = class_set_from_json(header.at("classes"));
        c.normalization = normalization_from_json(header.at("normalization"));
        c.metadata = header.value("metadata", json::object());
        const auto payload_bytes = header.at("payload_bytes").get<std::size_t>();
        payload.resize(payload_bytes);
        if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_bytes))) {
            throw CheckpointError(where + "truncated payload");
        }
        if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(where + "trailing bytes after payload");
        if (hex64(fnv1a64(payload.data(), payload.size())) != header.at("payload_fnv1a").get<std::string>()) {
            throw CheckpointError(where + "payload checksum mismatch");
        }
        for (const auto& e : header.at("tensors")) {
            NamedTensor t{e.at("name").get<std::string>(), e.at("shape").get<Shape>(), {}};
            const auto offset = e.at("offset").get<std::size_t>();
            const auto n = static_cast<std::size_t>(shape_numel(t.shape));
            if ((offset + n) * 4 > payload.size()) throw CheckpointError(where + "tensor '" + t.name + "' overruns the payload");
            t.values.resize(n);
            for (std::size_t i = 0; i < n; ++i) t.values[i] = read_le(payload.data() + 4 * (offset + i));
            c.tensors.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw CheckpointError(where + "malformed header: " + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(where + e.what());
    }
    return c;
}

template <typename T>
void load_parameters(OmniUnet<T>& model, const Checkpoint& checkpoint) {
    auto& params = model.parameters();
    if (params.size() != checkpoint.tensors.size()) {
        throw CheckpointError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) +
                              " tensors, model expects " + std::to_string(params.size()));
    }
    for (const auto& t : checkpoint.tensors) {
        auto* p = params.find(t.name);
        if (p == nullptr) throw CheckpointError("checkpoint tensor '" + t.name + "' is not a model parameter");
        if (p->tensor.shape() != t.shape) {
            throw CheckpointError("checkpoint tensor '" + t.name + "' has shape " + shape_string(t.shape) +
                                  ", model expects " + shape_string(p->tensor.shape()));
        }
    }
    for (const auto& t : checkpoint.tensors) {
        auto dst = params.find(t.name)->tensor.mutable_values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(t.values[i]);
    }
}

OmniUnet<float> restore_model(const Checkpoint& checkpoint) {
    OmniUnet<float> model(checkpoint.config, 0);
    load_parameters(model, checkpoint);
    return model;
}

template Checkpoint make_checkpoint(const OmniUnet<float>&, const ClassSet&, const Normalization&, json);
template Checkpoint make_checkpoint(const OmniUnet<double>&, const ClassSet&, const Normalization&, json);
template void load_parameters(OmniUnet<float>&, const Checkpoint&);
template void load_parameters(OmniUnet<double>&, const Checkpoint&);

}  // namespace omniunet
