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

#include "omniunet/decoder.hpp"

#include "omniunet/error.hpp"
#include "omniunet/ops.hpp"

namespace omniunet {

template <typename T>
DoubleConv<T>::DoubleConv(int in, int out, Rng& rng)
    : conv1(in, out, 3, Conv2dOptions{1, 1}, rng), conv2(out, out, 3, Conv2dOptions{1, 1}, rng) {}

template <typename T>
Tensor<T> DoubleConv<T>::operator()(const Tensor<T>& x) const {
    return gelu(conv2(gelu(conv1(x))));
}

template <typename T>
void DoubleConv<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
}

template <typename T>
Tensor<T> fuse_stage(const Tensor<T>& skip, const Tensor<T>& above, const DoubleConv<T>& convs) {
    if (skip.rank() != 4 || above.rank() != 4 || skip.dim(0) != above.dim(0) ||
        skip.dim(2) != 2 * above.dim(2) || skip.dim(3) != 2 * above.dim(3)) {
        throw DimensionError("fuse_stage: skip " + shape_string(skip.shape()) +
                             " must be exactly twice the extent of above " +
                             shape_string(above.shape()));
    }
    Tensor<T> up = upsample2x(above, UpsampleMode::bilinear);
    return convs(concat<T>({skip, up}, 1));
}

template <typename T>
Decoder<T>::Decoder(const ModelConfig& cfg, Rng& rng) : patch_size_(cfg.patch_size) {
    const auto& dc = cfg.decoder_channels;
    bottleneck_ = DoubleConv<T>(cfg.stage_dim(3), dc[3], rng);
    // Built deepest first so initialization order follows the data flow.
    fuse_[2] = DoubleConv<T>(cfg.stage_dim(2) + dc[3], dc[2], rng);
    fuse_[1] = DoubleConv<T>(cfg.stage_dim(1) + dc[2], dc[1], rng);
    fuse_[0] = DoubleConv<T>(cfg.stage_dim(0) + dc[1], dc[0], rng);
    head_ = Conv2d<T>(dc[0], cfg.num_classes, 1, Conv2dOptions{1, 0}, rng);
}

template <typename T>
Tensor<T> Decoder<T>::operator()(const FeaturePyramid<T>& pyramid) const {
    Tensor<T> x = bottleneck_(pyramid.levels[3]);
    for (int level = 2; level >= 0; --level) {
        x = fuse_stage(pyramid.levels[static_cast<std::size_t>(level)], x, fuse_[static_cast<std::size_t>(level)]);
    }
    x = upsample(x, patch_size_, UpsampleMode::bilinear);
    return head_(x);
}

template <typename T>
void Decoder<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    bottleneck_.collect(prefix + ".bottleneck", out);
    for (int level = 2; level >= 0; --level) {
        fuse_[static_cast<std::size_t>(level)].collect(prefix + ".fuse" + std::to_string(level + 1), out);
    }
    head_.collect(prefix + ".head", out);
}

template <typename T>
LabelMask predict_mask(const Tensor<T>& logits) {
    if (logits.rank() != 4) throw DimensionError("predict_mask expects [N,K,H,W], got " + shape_string(logits.shape()));
    const std::int64_t n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    if (k < 1 || k > 256) throw DimensionError("predict_mask: class count must be in [1, 256]");
    LabelMask mask(n, h, w);
    auto v = logits.values();
    const std::int64_t plane = h * w;
    for (std::int64_t b = 0; b < n; ++b) {
        const T* base = v.data() + b * k * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            std::int64_t best = 0;
            T best_v = base[i];
            for (std::int64_t c = 1; c < k; ++c) {
                if (base[c * plane + i] > best_v) {
                    best_v = base[c * plane + i];
                    best = c;
                }
            }
            mask.labels[static_cast<std::size_t>(b * plane + i)] = static_cast<std::uint8_t>(best);
        }
    }
    return mask;
}

template <typename T>
Tensor<T> crop_spatial(const Tensor<T>& x, std::int64_t height, std::int64_t width) {
    if (x.rank() != 4 || height > x.dim(2) || width > x.dim(3)) {
        throw DimensionError("crop_spatial: cannot crop " + shape_string(x.shape()) + " to " +
                             std::to_string(height) + "x" + std::to_string(width));
    }
    if (height == x.dim(2) && width == x.dim(3)) return x;
    const std::int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    std::vector<std::int64_t> src;
    src.reserve(static_cast<std::size_t>(planes * height * width));
    for (std::int64_t p = 0; p < planes; ++p)
        for (std::int64_t y = 0; y < height; ++y)
            for (std::int64_t xx = 0; xx < width; ++xx) src.push_back((p * h + y) * w + xx);
    return remap(x, Shape{x.dim(0), x.dim(1), height, width}, std::move(src));
}

template <typename T>
Tensor<T> pad_spatial(const Tensor<T>& x, std::int64_t height, std::int64_t width) {
    if (x.rank() != 4 || height < x.dim(2) || width < x.dim(3)) {
        throw DimensionError("pad_spatial: cannot pad " + shape_string(x.shape()) + " to " +
                             std::to_string(height) + "x" + std::to_string(width));
    }
    if (height == x.dim(2) && width == x.dim(3)) return x;
    const std::int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    std::vector<std::int64_t> src;
    src.reserve(static_cast<std::size_t>(planes * height * width));
    for (std::int64_t p = 0; p < planes; ++p)
        for (std::int64_t y = 0; y < height; ++y)
            for (std::int64_t xx = 0; xx < width; ++xx) src.push_back(y < h && xx < w ? (p * h + y) * w + xx : -1);
    return remap(x, Shape{x.dim(0), x.dim(1), height, width}, std::move(src));
}

#define OMNIUNET_INSTANTIATE_DECODER(T)                                                        \
    template struct DoubleConv<T>;                                                             \
    template Tensor<T> fuse_stage(const Tensor<T>&, const Tensor<T>&, const DoubleConv<T>&);   \
    template class Decoder<T>;                                                                 \
    template LabelMask predict_mask(const Tensor<T>&);                                         \
    template Tensor<T> crop_spatial(const Tensor<T>&, std::int64_t, std::int64_t);             \
    template Tensor<T> pad_spatial(const Tensor<T>&, std::int64_t, std::int64_t);

OMNIUNET_INSTANTIATE_DECODER(float)
OMNIUNET_INSTANTIATE_DECODER(double)

#undef OMNIUNET_INSTANTIATE_DECODER

}  // namespace omniunet
