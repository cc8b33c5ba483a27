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

#include "omniunet/model.hpp"

#include "omniunet/error.hpp"

namespace omniunet {

namespace {

ModelConfig validated(const ModelConfig& cfg) {
    cfg.validate();
    return cfg;
}

}  // namespace

template <typename T>
OmniUnet<T>::OmniUnet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(validated(cfg)) {
    Rng rng(seed);
    encoder_ = Encoder<T>(cfg_, rng);
    decoder_ = Decoder<T>(cfg_, rng);
    encoder_.collect("encoder", params_);
    decoder_.collect("decoder", params_);
}

template <typename T>
Tensor<T> OmniUnet<T>::operator()(const Tensor<T>& frames) const {
    if (frames.rank() != 4 || frames.dim(1) != cfg_.in_channels) {
        throw DimensionError("model expects [N," + std::to_string(cfg_.in_channels) +
                             ",H,W] frames, got " + shape_string(frames.shape()));
    }
    const std::int64_t h = frames.dim(2), w = frames.dim(3);
    if (h < 1 || w < 1) throw DimensionError("model input has an empty extent");
    const std::int64_t m = cfg_.input_multiple();
    const std::int64_t ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
    Tensor<T> logits = decoder_(encoder_(pad_spatial(frames, ph, pw)));
    return crop_spatial(logits, h, w);
}

template class OmniUnet<float>;
template class OmniUnet<double>;

}  // namespace omniunet
