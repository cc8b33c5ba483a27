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
#include <string>

#include "omniunet/encoder.hpp"
#include "omniunet/label_mask.hpp"
#include "omniunet/layers.hpp"
#include "omniunet/model_config.hpp"

namespace omniunet {

// Two 3x3 convolutions (padding 1), each followed by GELU.
template <typename T>
struct DoubleConv {
    Conv2d<T> conv1;
    Conv2d<T> conv2;

    DoubleConv() = default;
    DoubleConv(int in, int out, Rng& rng);

    Tensor<T> operator()(const Tensor<T>& x) const;
    void collect(const std::string& prefix, ParameterList<T>& out) const;
};

// Upsamples `above` 2x (bilinear), concatenates it after `skip` along
// channels and runs the double convolution.
template <typename T>
Tensor<T> fuse_stage(const Tensor<T>& skip, const Tensor<T>& above, const DoubleConv<T>& convs);

/// U-Net style decoder: a double-conv bottleneck on f4, fusions f3, f2, f1,
/// then a patch_size x bilinear upsample and a 1x1 projection to class logits.
template <typename T>
class Decoder {
public:
    Decoder() = default;
    Decoder(const ModelConfig& cfg, Rng& rng);

    // Logits [N,K,H,W] at the resolution of the (padded) encoder input.
    Tensor<T> operator()(const FeaturePyramid<T>& pyramid) const;
    void collect(const std::string& prefix, ParameterList<T>& out) const;

    const DoubleConv<T>& fusion(int level) const { return fuse_[static_cast<std::size_t>(level)]; }

private:
    int patch_size_ = 4;
    DoubleConv<T> bottleneck_;
    std::array<DoubleConv<T>, 3> fuse_;  // levels 1..3
    Conv2d<T> head_;
};

// Per-pixel argmax over classes of [N,K,H,W] logits (equivalently of their
// softmax); ties go to the lowest class index.
template <typename T>
LabelMask predict_mask(const Tensor<T>& logits);

// Crops NCHW to the top-left height x width.
template <typename T>
Tensor<T> crop_spatial(const Tensor<T>& x, std::int64_t height, std::int64_t width);

// Zero-pads NCHW on the bottom/right.
template <typename T>
Tensor<T> pad_spatial(const Tensor<T>& x, std::int64_t height, std::int64_t width);

}  // namespace omniunet
