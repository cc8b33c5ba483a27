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

#include "omniunet/layers.hpp"
#include "omniunet/model_config.hpp"
#include "omniunet/tensor.hpp"

namespace omniunet {

// Stage outputs in NCHW layout: f1 [N,C,H/4,W/4] ... f4 [N,8C,H/32,W/32]
// (for patch size 4).
template <typename T>
struct FeaturePyramid {
    std::array<Tensor<T>, kNumStages> levels;
};

// ---- token-grid rearrangements (NHWC) ------------------------------------

// [N,H,W,C] -> [N*(H/w)*(W/w), w, w, C]; windows are row-major per image.
template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, int window);

// Inverse of window_partition for a grid of extent height x width.
template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, int window, std::int64_t height,
                         std::int64_t width);

// Toroidal roll: out[y][x] = in[(y - dy) mod H][(x - dx) mod W].
template <typename T>
Tensor<T> cyclic_shift(const Tensor<T>& x, std::int64_t dy, std::int64_t dx);

// Zero-pads the bottom/right of a token grid, or crops it back.
template <typename T>
Tensor<T> pad_grid(const Tensor<T>& x, std::int64_t height, std::int64_t width);
template <typename T>
Tensor<T> crop_grid(const Tensor<T>& x, std::int64_t height, std::int64_t width);

// ---- window attention ----------------------------------------------------

// Attention logit offset used to exclude a key.
inline constexpr double kMaskPenalty = -100.0;

struct WindowLayout {
    int window = 0;  // tokens per window side
    int shift = 0;   // 0 for regular windows
};

// A grid no larger than the window in both directions becomes a single
// unshifted window; otherwise the configured size is kept and shifted blocks
// roll by window/2.
WindowLayout window_layout(std::int64_t grid_h, std::int64_t grid_w, int window, bool shifted);

// Flattened (window*window)^2 table offsets for relative positions, indexing a
// table built for `table_window` (>= window).
std::vector<std::int64_t> relative_position_index(int window, int table_window);

// Additive attention mask [nW, n, n] for a padded grid (padded_h x padded_w,
// real tokens in the top-left valid_h x valid_w). Pairs in different shift
// regions, and padded keys, receive kMaskPenalty.
template <typename T>
Tensor<T> window_attention_mask(std::int64_t padded_h, std::int64_t padded_w, int window, int shift,
                                std::int64_t valid_h, std::int64_t valid_w);

// Multi-head scaled dot-product attention inside each window.
// tokens [B,n,C]; bias [heads,n,n]; mask [nW,n,n] or undefined, with B a
// multiple of nW. probs, if given, receives the [B,heads,n,n] weights.
template <typename T>
Tensor<T> window_attention(const Tensor<T>& tokens, int heads, const Linear<T>& qkv,
                           const Linear<T>& proj, const Tensor<T>& bias, const Tensor<T>& mask,
                           Tensor<T>* probs = nullptr);

template <typename T>
struct WindowAttention {
    Linear<T> qkv;
    Linear<T> proj;
    Tensor<T> relative_position_bias_table;  // [(2w-1)^2, heads]
    int heads = 1;
    int window = 1;

    WindowAttention() = default;
    WindowAttention(int dim, int heads, int window, Rng& rng);

    // [heads, n, n] bias for an effective window no larger than `window`.
    Tensor<T> position_bias(int effective_window) const;
    Tensor<T> operator()(const Tensor<T>& tokens, int effective_window, const Tensor<T>& mask) const;
    void collect(const std::string& prefix, ParameterList<T>& out) const;
};

// Pre-norm transformer block over an NHWC token grid; odd blocks use shifted
// windows.
template <typename T>
struct SwinBlock {
    LayerNorm<T> norm1;
    WindowAttention<T> attn;
    LayerNorm<T> norm2;
    Linear<T> fc1;
    Linear<T> fc2;
    bool shifted = false;

    SwinBlock() = default;
    SwinBlock(int dim, int heads, int window, double mlp_ratio, bool shifted, Rng& rng);

    Tensor<T> operator()(const Tensor<T>& x) const;
    void collect(const std::string& prefix, ParameterList<T>& out) const;
};

// Linear projection of non-overlapping p x p patches (a stride-p convolution),
// then layer normalization over channels. Output is NHWC.
template <typename T>
struct PatchEmbed {
    Conv2d<T> proj;
    LayerNorm<T> norm;
    int patch_size = 4;

    PatchEmbed() = default;
    PatchEmbed(int in_channels, int dim, int patch_size, Rng& rng);

    Tensor<T> project(const Tensor<T>& frames) const;  // before normalization, NCHW
    Tensor<T> operator()(const Tensor<T>& frames) const;
    void collect(const std::string& prefix, ParameterList<T>& out) const;
};

// 2x2 neighbourhood concat -> layer norm -> bias-free projection to 2C.
template <typename T>
struct PatchMerging {
    LayerNorm<T> norm;
    Linear<T> reduction;

    PatchMerging() = default;
    PatchMerging(int dim, Rng& rng);

    Tensor<T> operator()(const Tensor<T>& x) const;
    void collect(const std::string& prefix, ParameterList<T>& out) const;
};

template <typename T>
struct EncoderStage {
    std::optional<PatchMerging<T>> downsample;
    std::vector<SwinBlock<T>> blocks;
};

template <typename T>
class Encoder {
public:
    Encoder() = default;
    Encoder(const ModelConfig& cfg, Rng& rng);

    // frames [N,in_channels,H,W] with H, W multiples of cfg.input_multiple().
    FeaturePyramid<T> operator()(const Tensor<T>& frames) const;
    void collect(const std::string& prefix, ParameterList<T>& out) const;

    const PatchEmbed<T>& patch_embed() const { return embed_; }
    const std::array<EncoderStage<T>, kNumStages>& stages() const { return stages_; }

private:
    ModelConfig cfg_;
    PatchEmbed<T> embed_;
    std::array<EncoderStage<T>, kNumStages> stages_;
};

// NHWC <-> NCHW.
template <typename T>
Tensor<T> to_channels_first(const Tensor<T>& x);
template <typename T>
Tensor<T> to_channels_last(const Tensor<T>& x);

}  // namespace omniunet
