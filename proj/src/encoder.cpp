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

#include "omniunet/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "omniunet/error.hpp"
#include "omniunet/ops.hpp"

namespace omniunet {

namespace {

void require_grid(const Shape& s, const char* op) {
    if (s.size() != 4) {
        throw DimensionError(std::string(op) + " expects an NHWC token grid, got " + shape_string(s));
    }
}

std::int64_t positive_mod(std::int64_t a, std::int64_t m) {
    std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

}  // namespace

template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, int window) {
    require_grid(x.shape(), "window_partition");
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (window < 1 || h % window != 0 || w % window != 0) {
        throw ConfigError("window_partition: grid " + std::to_string(h) + "x" + std::to_string(w) +
                          " is not divisible by window " + std::to_string(window));
    }
    const std::int64_t wh = h / window, ww = w / window;
    std::vector<std::int64_t> src;
    src.reserve(static_cast<std::size_t>(x.numel()));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t gy = 0; gy < wh; ++gy)
            for (std::int64_t gx = 0; gx < ww; ++gx)
                for (std::int64_t y = 0; y < window; ++y)
                    for (std::int64_t xx = 0; xx < window; ++xx) {
                        const std::int64_t base = ((b * h + gy * window + y) * w + gx * window + xx) * c;
                        for (std::int64_t ch = 0; ch < c; ++ch) src.push_back(base + ch);
                    }
    return remap(x, Shape{n * wh * ww, window, window, c}, std::move(src));
}

template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, int window, std::int64_t height, std::int64_t width) {
    require_grid(windows.shape(), "window_reverse");
    if (window < 1 || height % window != 0 || width % window != 0 || windows.dim(1) != window ||
        windows.dim(2) != window) {
        throw DimensionError("window_reverse: windows " + shape_string(windows.shape()) +
                             " do not tile a " + std::to_string(height) + "x" + std::to_string(width) +
                             " grid with window " + std::to_string(window));
    }
    const std::int64_t wh = height / window, ww = width / window;
    if (windows.dim(0) % (wh * ww) != 0) {
        throw DimensionError("window_reverse: " + std::to_string(windows.dim(0)) +
                             " windows is not a multiple of " + std::to_string(wh * ww));
    }
    const std::int64_t n = windows.dim(0) / (wh * ww), c = windows.dim(3);
    std::vector<std::int64_t> src;
    src.reserve(static_cast<std::size_t>(windows.numel()));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t y = 0; y < height; ++y)
            for (std::int64_t xx = 0; xx < width; ++xx) {
                const std::int64_t win = (b * wh + y / window) * ww + xx / window;
                const std::int64_t base = ((win * window + y % window) * window + xx % window) * c;
                for (std::int64_t ch = 0; ch < c; ++ch) src.push_back(base + ch);
            }
    return remap(windows, Shape{n, height, width, c}, std::move(src));
}

template <typename T>
Tensor<T> cyclic_shift(const Tensor<T>& x, std::int64_t dy, std::int64_t dx) {
    require_grid(x.shape(), "cyclic_shift");
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    std::vector<std::int64_t> src;
    src.reserve(static_cast<std::size_t>(x.numel()));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t xx = 0; xx < w; ++xx) {
                const std::int64_t sy = positive_mod(y - dy, h), sx = positive_mod(xx - dx, w);
                const std::int64_t base = ((b * h + sy) * w + sx) * c;
                for (std::int64_t ch = 0; ch < c; ++ch) src.push_back(base + ch);
            }
    return remap(x, x.shape(), std::move(src));
}

template <typename T>
Tensor<T> pad_grid(const Tensor<T>& x, std::int64_t height, std::int64_t width) {
    require_grid(x.shape(), "pad_grid");
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (height < h || width < w) throw DimensionError("pad_grid: target smaller than input");
    std::vector<std::int64_t> src;
    src.reserve(static_cast<std::size_t>(n * height * width * c));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t y = 0; y < height; ++y)
            for (std::int64_t xx = 0; xx < width; ++xx)
                for (std::int64_t ch = 0; ch < c; ++ch)
                    src.push_back(y < h && xx < w ? ((b * h + y) * w + xx) * c + ch : -1);
    return remap(x, Shape{n, height, width, c}, std::move(src));
}

template <typename T>
Tensor<T> crop_grid(const Tensor<T>& x, std::int64_t height, std::int64_t width) {
    require_grid(x.shape(), "crop_grid");
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (height > h || width > w) throw DimensionError("crop_grid: target larger than input");
    std::vector<std::int64_t> src;
    src.reserve(static_cast<std::size_t>(n * height * width * c));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t y = 0; y < height; ++y)
            for (std::int64_t xx = 0; xx < width; ++xx)
                for (std::int64_t ch = 0; ch < c; ++ch) src.push_back(((b * h + y) * w + xx) * c + ch);
    return remap(x, Shape{n, height, width, c}, std::move(src));
}

template <typename T>
Tensor<T> to_channels_first(const Tensor<T>& x) {
    require_grid(x.shape(), "to_channels_first");
    return permute(x, {0, 3, 1, 2});
}

template <typename T>
Tensor<T> to_channels_last(const Tensor<T>& x) {
    if (x.rank() != 4) throw DimensionError("to_channels_last expects NCHW, got " + shape_string(x.shape()));
    return permute(x, {0, 2, 3, 1});
}

WindowLayout window_layout(std::int64_t grid_h, std::int64_t grid_w, int window, bool shifted) {
    if (grid_h <= window && grid_w <= window) {
        return WindowLayout{static_cast<int>(std::min(grid_h, grid_w)), 0};
    }
    return WindowLayout{window, shifted ? window / 2 : 0};
}

std::vector<std::int64_t> relative_position_index(int window, int table_window) {
    const int n = window * window;
    const int side = 2 * table_window - 1;
    std::vector<std::int64_t> index(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int dy = i / window - j / window + table_window - 1;
            const int dx = i % window - j % window + table_window - 1;
            index[static_cast<std::size_t>(i * n + j)] = dy * side + dx;
        }
    }
    return index;
}

template <typename T>
Tensor<T> window_attention_mask(std::int64_t padded_h, std::int64_t padded_w, int window, int shift,
                                std::int64_t valid_h, std::int64_t valid_w) {
    if (padded_h % window != 0 || padded_w % window != 0) {
        throw ConfigError("window_attention_mask: padded grid not divisible by window");
    }
    // Region label in the rolled grid, and whether the token there is padding.
    auto region = [&](std::int64_t v, std::int64_t extent) {
        if (shift == 0) return 0;
        if (v < extent - window) return 0;
        if (v < extent - shift) return 1;
        return 2;
    };
    std::vector<int> label(static_cast<std::size_t>(padded_h * padded_w));
    std::vector<bool> padded(label.size());
    for (std::int64_t y = 0; y < padded_h; ++y) {
        for (std::int64_t x = 0; x < padded_w; ++x) {
            const auto i = static_cast<std::size_t>(y * padded_w + x);
            label[i] = region(y, padded_h) * 3 + region(x, padded_w);
            const std::int64_t oy = (y + shift) % padded_h, ox = (x + shift) % padded_w;
            padded[i] = oy >= valid_h || ox >= valid_w;
        }
    }
    const std::int64_t wh = padded_h / window, ww = padded_w / window;
    const std::int64_t n = static_cast<std::int64_t>(window) * window;
    std::vector<T> mask(static_cast<std::size_t>(wh * ww * n * n), T(0));
    std::vector<std::size_t> member(static_cast<std::size_t>(n));
    for (std::int64_t gy = 0; gy < wh; ++gy) {
        for (std::int64_t gx = 0; gx < ww; ++gx) {
            for (std::int64_t t = 0; t < n; ++t) {
                member[static_cast<std::size_t>(t)] =
                    static_cast<std::size_t>((gy * window + t / window) * padded_w + gx * window + t % window);
            }
            T* m = mask.data() + (gy * ww + gx) * n * n;
            for (std::int64_t i = 0; i < n; ++i) {
                for (std::int64_t j = 0; j < n; ++j) {
                    const auto a = member[static_cast<std::size_t>(i)];
                    const auto b = member[static_cast<std::size_t>(j)];
                    if (label[a] != label[b] || padded[b]) m[i * n + j] = static_cast<T>(kMaskPenalty);
                }
            }
        }
    }
    return Tensor<T>(Shape{wh * ww, n, n}, std::move(mask));
}

template <typename T>
Tensor<T> window_attention(const Tensor<T>& tokens, int heads, const Linear<T>& qkv,
                           const Linear<T>& proj, const Tensor<T>& bias, const Tensor<T>& mask,
                           Tensor<T>* probs) {
    if (tokens.rank() != 3) {
        throw DimensionError("window_attention expects [B,n,C] tokens, got " + shape_string(tokens.shape()));
    }
    const std::int64_t b = tokens.dim(0), n = tokens.dim(1), c = tokens.dim(2);
    if (heads < 1 || c % heads != 0) {
        throw DimensionError("window_attention: " + std::to_string(c) + " channels not divisible by " +
                             std::to_string(heads) + " heads");
    }
    if (bias.shape() != Shape{heads, n, n}) {
        throw DimensionError("window_attention: bias " + shape_string(bias.shape()) + " expected " +
                             shape_string(Shape{heads, n, n}));
    }
    const std::int64_t d = c / heads;
    Tensor<T> packed = qkv(tokens);  // [B, n, 3C]
    if (packed.dim(2) != 3 * c) throw DimensionError("window_attention: qkv must project C -> 3C");

    // part 0/1/2 = q/k/v; k is laid out transposed as [B,h,d,n].
    auto split = [&](int part, bool transposed) {
        std::vector<std::int64_t> src;
        src.reserve(static_cast<std::size_t>(b * n * c));
        for (std::int64_t bi = 0; bi < b; ++bi)
            for (std::int64_t h = 0; h < heads; ++h) {
                auto at = [&](std::int64_t t, std::int64_t e) { return (bi * n + t) * 3 * c + part * c + h * d + e; };
                if (transposed) {
                    for (std::int64_t e = 0; e < d; ++e)
                        for (std::int64_t t = 0; t < n; ++t) src.push_back(at(t, e));
                } else {
                    for (std::int64_t t = 0; t < n; ++t)
                        for (std::int64_t e = 0; e < d; ++e) src.push_back(at(t, e));
                }
            }
        Shape s = transposed ? Shape{b, heads, d, n} : Shape{b, heads, n, d};
        return remap(packed, std::move(s), std::move(src));
    };
    Tensor<T> q = scale(split(0, false), T(1) / std::sqrt(static_cast<T>(d)));
    Tensor<T> kt = split(1, true);
    Tensor<T> v = split(2, false);

    Tensor<T> logits = add_broadcast(matmul(q, kt), bias);  // [B,h,n,n]
    if (mask.defined()) {
        const std::int64_t nw = mask.dim(0);
        if (mask.shape() != Shape{nw, n, n} || b % nw != 0) {
            throw DimensionError("window_attention: mask " + shape_string(mask.shape()) +
                                 " does not match " + std::to_string(b) + " windows of " +
                                 std::to_string(n) + " tokens");
        }
        std::vector<T> tiled(static_cast<std::size_t>(nw * heads * n * n));
        auto mv = mask.values();
        for (std::int64_t w = 0; w < nw; ++w)
            for (std::int64_t h = 0; h < heads; ++h)
                std::copy_n(mv.data() + w * n * n, n * n, tiled.data() + (w * heads + h) * n * n);
        Tensor<T> penalty(Shape{nw, heads, n * n}, std::move(tiled));
        logits = reshape(add_broadcast(reshape(logits, {b / nw, nw, heads, n * n}), penalty),
                         {b, heads, n, n});
    }
    Tensor<T> weights = softmax(logits, -1);
    if (probs) *probs = weights;
    Tensor<T> out = matmul(weights, v);                        // [B,h,n,d]
    out = reshape(permute(out, {0, 2, 1, 3}), {b, n, c});      // [B,n,C]
    return proj(out);
}

template <typename T>
WindowAttention<T>::WindowAttention(int dim, int heads_, int window_, Rng& rng)
    : qkv(dim, 3 * dim, true, rng),
      proj(dim, dim, true, rng),
      relative_position_bias_table(
          trunc_normal<T>({(2 * window_ - 1) * (2 * window_ - 1), heads_}, 0.02, rng)),
      heads(heads_),
      window(window_) {}

template <typename T>
Tensor<T> WindowAttention<T>::position_bias(int effective_window) const {
    if (effective_window > window) throw ConfigError("effective window exceeds the bias table");
    const auto index = relative_position_index(effective_window, window);
    const std::int64_t n = static_cast<std::int64_t>(effective_window) * effective_window;
    std::vector<std::int64_t> src(static_cast<std::size_t>(heads * n * n));
    for (std::int64_t h = 0; h < heads; ++h)
        for (std::int64_t k = 0; k < n * n; ++k)
            src[static_cast<std::size_t>(h * n * n + k)] = index[static_cast<std::size_t>(k)] * heads + h;
    return remap(relative_position_bias_table, Shape{heads, n, n}, std::move(src));
}

template <typename T>
Tensor<T> WindowAttention<T>::operator()(const Tensor<T>& tokens, int effective_window,
                                         const Tensor<T>& mask) const {
    return window_attention(tokens, heads, qkv, proj, position_bias(effective_window), mask);
}

template <typename T>
void WindowAttention<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    qkv.collect(prefix + ".qkv", out);
    out.add(prefix + ".relative_position_bias_table", relative_position_bias_table);
    proj.collect(prefix + ".proj", out);
}

template <typename T>
SwinBlock<T>::SwinBlock(int dim, int heads, int window, double mlp_ratio, bool shifted_, Rng& rng)
    : norm1(dim),
      attn(dim, heads, window, rng),
      norm2(dim),
      fc1(dim, static_cast<int>(dim * mlp_ratio), true, rng),
      fc2(static_cast<int>(dim * mlp_ratio), dim, true, rng),
      shifted(shifted_) {}

template <typename T>
Tensor<T> SwinBlock<T>::operator()(const Tensor<T>& x) const {
    require_grid(x.shape(), "swin_block");
    const std::int64_t h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const WindowLayout layout = window_layout(h, w, attn.window, shifted);
    const int ws = layout.window;
    const std::int64_t ph = (h + ws - 1) / ws * ws, pw = (w + ws - 1) / ws * ws;
    const bool padded = ph != h || pw != w;

    Tensor<T> y = norm1(x);
    if (padded) y = pad_grid(y, ph, pw);
    if (layout.shift) y = cyclic_shift(y, -layout.shift, -layout.shift);
    Tensor<T> windows = window_partition(y, ws);
    windows = reshape(windows, {windows.dim(0), static_cast<std::int64_t>(ws) * ws, c});

    Tensor<T> mask;
    if (layout.shift || padded) mask = window_attention_mask<T>(ph, pw, ws, layout.shift, h, w);
    Tensor<T> attended = attn(windows, ws, mask);

    y = window_reverse(reshape(attended, {attended.dim(0), ws, ws, c}), ws, ph, pw);
    if (layout.shift) y = cyclic_shift(y, layout.shift, layout.shift);
    if (padded) y = crop_grid(y, h, w);
    Tensor<T> out = add(x, y);

    return add(out, fc2(gelu(fc1(norm2(out)))));
}

template <typename T>
void SwinBlock<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    norm1.collect(prefix + ".norm1", out);
    attn.collect(prefix + ".attn", out);
    norm2.collect(prefix + ".norm2", out);
    fc1.collect(prefix + ".mlp.fc1", out);
    fc2.collect(prefix + ".mlp.fc2", out);
}

template <typename T>
PatchEmbed<T>::PatchEmbed(int in_channels, int dim, int patch, Rng& rng)
    : proj(in_channels, dim, patch, Conv2dOptions{patch, 0}, rng), norm(dim), patch_size(patch) {}

template <typename T>
Tensor<T> PatchEmbed<T>::project(const Tensor<T>& frames) const {
    if (frames.rank() != 4) throw DimensionError("patch_embed expects NCHW frames, got " + shape_string(frames.shape()));
    if (frames.dim(2) % patch_size != 0 || frames.dim(3) % patch_size != 0) {
        throw ConfigError("patch_embed: extent " + std::to_string(frames.dim(2)) + "x" +
                          std::to_string(frames.dim(3)) + " is not divisible by patch size " +
                          std::to_string(patch_size));
    }
    return proj(frames);
}

template <typename T>
Tensor<T> PatchEmbed<T>::operator()(const Tensor<T>& frames) const {
    return norm(to_channels_last(project(frames)));
}

template <typename T>
void PatchEmbed<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    proj.collect(prefix + ".proj", out);
    norm.collect(prefix + ".norm", out);
}

template <typename T>
PatchMerging<T>::PatchMerging(int dim, Rng& rng) : norm(4 * dim), reduction(4 * dim, 2 * dim, false, rng) {}

template <typename T>
Tensor<T> PatchMerging<T>::operator()(const Tensor<T>& x) const {
    require_grid(x.shape(), "patch_merging");
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ConfigError("patch_merging: odd grid extent " + std::to_string(h) + "x" + std::to_string(w));
    }
    // Neighbour order (dy, dx): (0,0), (1,0), (0,1), (1,1).
    constexpr int offsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    std::vector<std::int64_t> src;
    src.reserve(static_cast<std::size_t>(x.numel()));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t y = 0; y < h / 2; ++y)
            for (std::int64_t xx = 0; xx < w / 2; ++xx)
                for (const auto& o : offsets) {
                    const std::int64_t base = ((b * h + 2 * y + o[0]) * w + 2 * xx + o[1]) * c;
                    for (std::int64_t ch = 0; ch < c; ++ch) src.push_back(base + ch);
                }
    Tensor<T> merged = remap(x, Shape{n, h / 2, w / 2, 4 * c}, std::move(src));
    return reduction(norm(merged));
}

template <typename T>
void PatchMerging<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    norm.collect(prefix + ".norm", out);
    reduction.collect(prefix + ".reduction", out);
}

template <typename T>
Encoder<T>::Encoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    embed_ = PatchEmbed<T>(cfg.in_channels, cfg.embed_dim, cfg.patch_size, rng);
    for (int s = 0; s < kNumStages; ++s) {
        auto& stage = stages_[static_cast<std::size_t>(s)];
        if (s > 0) stage.downsample.emplace(cfg.stage_dim(s - 1), rng);
        for (int b = 0; b < cfg.depths[static_cast<std::size_t>(s)]; ++b) {
            stage.blocks.emplace_back(cfg.stage_dim(s), cfg.num_heads[static_cast<std::size_t>(s)],
                                      cfg.window_size, cfg.mlp_ratio, b % 2 == 1, rng);
        }
    }
}

template <typename T>
FeaturePyramid<T> Encoder<T>::operator()(const Tensor<T>& frames) const {
    if (frames.rank() != 4 || frames.dim(1) != cfg_.in_channels) {
        throw DimensionError("encoder expects [N," + std::to_string(cfg_.in_channels) +
                             ",H,W] frames, got " + shape_string(frames.shape()));
    }
    const int multiple = cfg_.input_multiple();
    if (frames.dim(2) % multiple != 0 || frames.dim(3) % multiple != 0) {
        throw ConfigError("encoder input extent " + std::to_string(frames.dim(2)) + "x" +
                          std::to_string(frames.dim(3)) + " is not a multiple of " +
                          std::to_string(multiple));
    }
    FeaturePyramid<T> pyramid;
    Tensor<T> x = embed_(frames);
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const auto& stage = stages_[s];
        if (stage.downsample) x = (*stage.downsample)(x);
        for (const auto& block : stage.blocks) x = block(x);
        pyramid.levels[s] = to_channels_first(x);
    }
    return pyramid;
}

template <typename T>
void Encoder<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    embed_.collect(prefix + ".patch_embed", out);
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const std::string stage = prefix + ".stage" + std::to_string(s + 1);
        if (stages_[s].downsample) stages_[s].downsample->collect(stage + ".downsample", out);
        for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b) {
            stages_[s].blocks[b].collect(stage + ".block" + std::to_string(b), out);
        }
    }
}

#define OMNIUNET_INSTANTIATE_ENCODER(T)                                                            \
    template Tensor<T> window_partition(const Tensor<T>&, int);                                    \
    template Tensor<T> window_reverse(const Tensor<T>&, int, std::int64_t, std::int64_t);          \
    template Tensor<T> cyclic_shift(const Tensor<T>&, std::int64_t, std::int64_t);                 \
    template Tensor<T> pad_grid(const Tensor<T>&, std::int64_t, std::int64_t);                     \
    template Tensor<T> crop_grid(const Tensor<T>&, std::int64_t, std::int64_t);                    \
    template Tensor<T> to_channels_first(const Tensor<T>&);                                        \
    template Tensor<T> to_channels_last(const Tensor<T>&);                                         \
    template Tensor<T> window_attention_mask<T>(std::int64_t, std::int64_t, int, int, std::int64_t, \
                                                std::int64_t);                                     \
    template Tensor<T> window_attention(const Tensor<T>&, int, const Linear<T>&, const Linear<T>&, \
                                        const Tensor<T>&, const Tensor<T>&, Tensor<T>*);           \
    template struct WindowAttention<T>;                                                            \
    template struct SwinBlock<T>;                                                                  \
    template struct PatchEmbed<T>;                                                                 \
    template struct PatchMerging<T>;                                                               \
    template class Encoder<T>;

OMNIUNET_INSTANTIATE_ENCODER(float)
OMNIUNET_INSTANTIATE_ENCODER(double)

#undef OMNIUNET_INSTANTIATE_ENCODER

}  // namespace omniunet
