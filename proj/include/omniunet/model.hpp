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

#include "omniunet/decoder.hpp"
#include "omniunet/encoder.hpp"
#include "omniunet/layers.hpp"
#include "omniunet/model_config.hpp"

namespace omniunet {

/// Encoder + decoder with pad/crop handling for arbitrary input extents.
///
/// Parameters are registered at construction under `encoder.*` and
/// `decoder.*`. Not copyable: copies would alias the same parameter storage.
template <typename T>
class OmniUnet {
public:
    OmniUnet(const ModelConfig& cfg, std::uint64_t seed);

    OmniUnet(const OmniUnet&) = delete;
    OmniUnet& operator=(const OmniUnet&) = delete;
    OmniUnet(OmniUnet&&) = default;
    OmniUnet& operator=(OmniUnet&&) = default;

    // frames [N,in_channels,H,W] -> logits [N,K,H,W]. Extents that are not
    // multiples of cfg.input_multiple() are zero-padded bottom/right before
    // encoding and the logits are cropped back.
    Tensor<T> operator()(const Tensor<T>& frames) const;

    const ModelConfig& config() const { return cfg_; }
    ParameterList<T>& parameters() { return params_; }
    const ParameterList<T>& parameters() const { return params_; }
    const Encoder<T>& encoder() const { return encoder_; }
    const Decoder<T>& decoder() const { return decoder_; }

private:
    ModelConfig cfg_;
    Encoder<T> encoder_;
    Decoder<T> decoder_;
    ParameterList<T> params_;
};

extern template class OmniUnet<float>;
extern template class OmniUnet<double>;

}  // namespace omniunet
