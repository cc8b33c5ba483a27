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

#include "omniunet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

#include "omniunet/error.hpp"

namespace omniunet {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
}

int normalize_axis(int axis, int rank, const char* op) {
    int a = axis < 0 ? axis + rank : axis;
    if (a < 0 || a >= rank) {
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for rank " + std::to_string(rank));
    }
    return a;
}

struct AxisSplit {
    std::int64_t outer = 1;
    std::int64_t extent = 1;
    std::int64_t inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
    AxisSplit s;
    for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
    s.extent = shape[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    auto av = a.values();
    auto bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return Tensor<T>::record(a.shape(), std::move(out), {a, b}, [](BackwardContext<T>& ctx) {
        for (auto& g : ctx.grad_in) {
            if (g.empty()) continue;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    auto av = a.values();
    auto bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return Tensor<T>::record(a.shape(), std::move(out), {a, b}, [](BackwardContext<T>& ctx) {
        if (!ctx.grad_in[0].empty()) {
            for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) ctx.grad_in[0][i] += ctx.grad_out[i];
        }
        if (!ctx.grad_in[1].empty()) {
            for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) ctx.grad_in[1][i] -= ctx.grad_out[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    auto av = a.values();
    auto bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return Tensor<T>::record(a.shape(), std::move(out), {a, b}, [](BackwardContext<T>& ctx) {
        const auto& go = ctx.grad_out;
        if (!ctx.grad_in[0].empty()) {
            for (std::size_t i = 0; i < go.size(); ++i) ctx.grad_in[0][i] += go[i] * ctx.in[1][i];
        }
        if (!ctx.grad_in[1].empty()) {
            for (std::size_t i = 0; i < go.size(); ++i) ctx.grad_in[1][i] += go[i] * ctx.in[0][i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    auto av = a.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
    return Tensor<T>::record(a.shape(), std::move(out), {a}, [factor](BackwardContext<T>& ctx) {
        for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) ctx.grad_in[0][i] += ctx.grad_out[i] * factor;
    });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
    auto av = a.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + value;
    return Tensor<T>::record(a.shape(), std::move(out), {a}, [](BackwardContext<T>& ctx) {
        for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) ctx.grad_in[0][i] += ctx.grad_out[i];
    });
}

template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    bool ok = bs.size() <= as.size() && std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size()));
    if (!ok) {
        throw DimensionError("add_broadcast: " + shape_string(bs) + " is not a trailing shape of " +
                             shape_string(as));
    }
    auto av = a.values();
    auto bv = b.values();
    const std::size_t inner = bv.size();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % inner];
    return Tensor<T>::record(as, std::move(out), {a, b}, [inner](BackwardContext<T>& ctx) {
        const auto& go = ctx.grad_out;
        if (!ctx.grad_in[0].empty()) {
            for (std::size_t i = 0; i < go.size(); ++i) ctx.grad_in[0][i] += go[i];
        }
        if (!ctx.grad_in[1].empty()) {
            for (std::size_t base = 0; base < go.size(); base += inner) {
                for (std::size_t j = 0; j < inner; ++j) ctx.grad_in[1][j] += go[base + j];
            }
        }
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T total = T(0);
    for (T v : a.values()) total += v;
    return Tensor<T>::record(Shape{}, {total}, {a}, [](BackwardContext<T>& ctx) {
        const T g = ctx.grad_out[0];
        for (auto& v : ctx.grad_in[0]) v += g;
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    if (a.numel() == 0) throw DimensionError("mean of an empty tensor");
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    auto mismatch = [&] {
        return DimensionError("matmul: incompatible shapes " + shape_string(as) + " and " +
                              shape_string(bs));
    };
    if (as.size() < 2 || bs.size() < 2) throw mismatch();
    const std::int64_t m = as[as.size() - 2];
    const std::int64_t k = as[as.size() - 1];
    const std::int64_t n = bs[bs.size() - 1];
    if (bs[bs.size() - 2] != k) throw mismatch();

    Shape a_lead(as.begin(), as.end() - 2);
    Shape b_lead(bs.begin(), bs.end() - 2);
    Shape lead;
    if (a_lead == b_lead || b_lead.empty()) {
        lead = a_lead;
    } else if (a_lead.empty()) {
        lead = b_lead;
    } else {
        throw mismatch();
    }
    const std::int64_t batch = shape_numel(lead);
    const std::int64_t a_step = a_lead.empty() ? 0 : m * k;
    const std::int64_t b_step = b_lead.empty() ? 0 : k * n;

    Shape out_shape = lead;
    out_shape.push_back(m);
    out_shape.push_back(n);

    auto av = a.values();
    auto bv = b.values();
    std::vector<T> out(static_cast<std::size_t>(batch * m * n), T(0));
    for (std::int64_t bi = 0; bi < batch; ++bi) {
        const T* pa = av.data() + bi * a_step;
        const T* pb = bv.data() + bi * b_step;
        T* pc = out.data() + bi * m * n;
        for (std::int64_t i = 0; i < m; ++i) {
            T* row = pc + i * n;
            for (std::int64_t p = 0; p < k; ++p) {
                const T aip = pa[i * k + p];
                const T* brow = pb + p * n;
                for (std::int64_t j = 0; j < n; ++j) row[j] += aip * brow[j];
            }
        }
    }

    return Tensor<T>::record(
        std::move(out_shape), std::move(out), {a, b},
        [=](BackwardContext<T>& ctx) {
            const T* go = ctx.grad_out.data();
            for (std::int64_t bi = 0; bi < batch; ++bi) {
                const T* pa = ctx.in[0].data() + bi * a_step;
                const T* pb = ctx.in[1].data() + bi * b_step;
                const T* pg = go + bi * m * n;
                if (!ctx.grad_in[0].empty()) {
                    T* ga = ctx.grad_in[0].data() + bi * a_step;
                    for (std::int64_t i = 0; i < m; ++i) {
                        for (std::int64_t p = 0; p < k; ++p) {
                            T acc = T(0);
                            const T* grow = pg + i * n;
                            const T* brow = pb + p * n;
                            for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                            ga[i * k + p] += acc;
                        }
                    }
                }
                if (!ctx.grad_in[1].empty()) {
                    T* gb = ctx.grad_in[1].data() + bi * b_step;
                    for (std::int64_t i = 0; i < m; ++i) {
                        const T* grow = pg + i * n;
                        for (std::int64_t p = 0; p < k; ++p) {
                            const T aip = pa[i * k + p];
                            T* gbrow = gb + p * n;
                            for (std::int64_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    int r = a.rank();
    if (r < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_string(a.shape()));
    std::vector<int> axes(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) axes[static_cast<std::size_t>(i)] = i;
    std::swap(axes[static_cast<std::size_t>(r - 1)], axes[static_cast<std::size_t>(r - 2)]);
    return permute(a, axes);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (weight.rank() != 2 || x.rank() < 1 || x.dim(-1) != weight.dim(1)) {
        throw DimensionError("linear: input " + shape_string(x.shape()) +
                             " does not match weight " + shape_string(weight.shape()));
    }
    const std::int64_t in = weight.dim(1);
    const std::int64_t outf = weight.dim(0);
    const bool has_bias = bias.defined();
    if (has_bias && (bias.rank() != 1 || bias.dim(0) != outf)) {
        throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match " +
                             std::to_string(outf) + " outputs");
    }
    const std::int64_t rows = x.numel() / in;
    Shape out_shape = x.shape();
    out_shape.back() = outf;

    auto xv = x.values();
    auto wv = weight.values();
    std::vector<T> out(static_cast<std::size_t>(rows * outf));
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = xv.data() + r * in;
        for (std::int64_t o = 0; o < outf; ++o) {
            const T* wr = wv.data() + o * in;
            T acc = has_bias ? bias.values()[static_cast<std::size_t>(o)] : T(0);
            for (std::int64_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
            out[static_cast<std::size_t>(r * outf + o)] = acc;
        }
    }
    std::vector<Tensor<T>> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    return Tensor<T>::record(
        std::move(out_shape), std::move(out), inputs, [=](BackwardContext<T>& ctx) {
            const T* go = ctx.grad_out.data();
            const T* px = ctx.in[0].data();
            const T* pw = ctx.in[1].data();
            if (!ctx.grad_in[0].empty()) {
                T* gx = ctx.grad_in[0].data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    for (std::int64_t o = 0; o < outf; ++o) {
                        const T g = go[r * outf + o];
                        const T* wr = pw + o * in;
                        T* gxr = gx + r * in;
                        for (std::int64_t i = 0; i < in; ++i) gxr[i] += g * wr[i];
                    }
                }
            }
            if (!ctx.grad_in[1].empty()) {
                T* gw = ctx.grad_in[1].data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const T* xr = px + r * in;
                    for (std::int64_t o = 0; o < outf; ++o) {
                        const T g = go[r * outf + o];
                        T* gwr = gw + o * in;
                        for (std::int64_t i = 0; i < in; ++i) gwr[i] += g * xr[i];
                    }
                }
            }
            if (has_bias && !ctx.grad_in[2].empty()) {
                T* gb = ctx.grad_in[2].data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    for (std::int64_t o = 0; o < outf; ++o) gb[o] += go[r * outf + o];
                }
            }
        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                             shape_string(shape));
    }
    std::vector<T> out(a.values().begin(), a.values().end());
    return Tensor<T>::record(std::move(shape), std::move(out), {a}, [](BackwardContext<T>& ctx) {
        for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) ctx.grad_in[0][i] += ctx.grad_out[i];
    });
}

template <typename T>
Tensor<T> remap(const Tensor<T>& a, Shape shape, std::vector<std::int64_t> source) {
    if (shape_numel(shape) != static_cast<std::int64_t>(source.size())) {
        throw DimensionError("remap: " + std::to_string(source.size()) +
                             " source indices for shape " + shape_string(shape));
    }
    const std::int64_t n = a.numel();
    auto av = a.values();
    std::vector<T> out(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto s = source[i];
        if (s >= n) throw DimensionError("remap: source index out of range");
        out[i] = s < 0 ? T(0) : av[static_cast<std::size_t>(s)];
    }
    auto idx = std::make_shared<const std::vector<std::int64_t>>(std::move(source));
    return Tensor<T>::record(std::move(shape), std::move(out), {a}, [idx](BackwardContext<T>& ctx) {
        const auto& src = *idx;
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (src[i] >= 0) ctx.grad_in[0][static_cast<std::size_t>(src[i])] += ctx.grad_out[i];
        }
    });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& axes) {
    const auto& in_shape = a.shape();
    const int r = a.rank();
    if (static_cast<int>(axes.size()) != r) {
        throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for rank " +
                             std::to_string(r));
    }
    std::vector<bool> seen(static_cast<std::size_t>(r), false);
    for (int ax : axes) {
        if (ax < 0 || ax >= r || seen[static_cast<std::size_t>(ax)]) {
            throw DimensionError("permute: axes are not a permutation");
        }
        seen[static_cast<std::size_t>(ax)] = true;
    }
    std::vector<std::int64_t> in_stride(static_cast<std::size_t>(r), 1);
    for (int i = r - 2; i >= 0; --i) {
        in_stride[static_cast<std::size_t>(i)] =
            in_stride[static_cast<std::size_t>(i + 1)] * in_shape[static_cast<std::size_t>(i + 1)];
    }
    Shape out_shape(static_cast<std::size_t>(r));
    std::vector<std::int64_t> stride(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) {
        out_shape[static_cast<std::size_t>(i)] = in_shape[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];
        stride[static_cast<std::size_t>(i)] = in_stride[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];
    }
    // Pad to four axes so one loop nest covers every rank.
    std::int64_t e[4] = {1, 1, 1, 1};
    std::int64_t s[4] = {0, 0, 0, 0};
    for (int i = 0; i < r; ++i) {
        e[4 - r + i] = out_shape[static_cast<std::size_t>(i)];
        s[4 - r + i] = stride[static_cast<std::size_t>(i)];
    }
    std::vector<std::int64_t> source;
    source.reserve(static_cast<std::size_t>(a.numel()));
    for (std::int64_t i0 = 0; i0 < e[0]; ++i0)
        for (std::int64_t i1 = 0; i1 < e[1]; ++i1)
            for (std::int64_t i2 = 0; i2 < e[2]; ++i2)
                for (std::int64_t i3 = 0; i3 < e[3]; ++i3)
                    source.push_back(i0 * s[0] + i1 * s[1] + i2 * s[2] + i3 * s[3]);
    return remap(a, std::move(out_shape), std::move(source));
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    const int r = parts.front().rank();
    const int ax = normalize_axis(axis, r, "concat");
    Shape out_shape = parts.front().shape();
    out_shape[static_cast<std::size_t>(ax)] = 0;
    for (const auto& p : parts) {
        Shape s = p.shape();
        if (static_cast<int>(s.size()) != r) throw DimensionError("concat: rank mismatch");
        out_shape[static_cast<std::size_t>(ax)] += s[static_cast<std::size_t>(ax)];
        s[static_cast<std::size_t>(ax)] = out_shape[static_cast<std::size_t>(ax)];
        Shape ref = out_shape;
        if (s != ref) {
            throw DimensionError("concat: " + shape_string(p.shape()) + " does not match " +
                                 shape_string(parts.front().shape()) + " off axis " +
                                 std::to_string(ax));
        }
    }
    const AxisSplit total = split_at(out_shape, ax);
    std::vector<std::int64_t> widths;  // extent * inner per part
    for (const auto& p : parts) widths.push_back(p.dim(ax) * total.inner);
    const std::int64_t row = total.extent * total.inner;

    std::vector<T> out(static_cast<std::size_t>(shape_numel(out_shape)));
    std::int64_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto pv = parts[k].values();
        const std::int64_t w = widths[k];
        for (std::int64_t o = 0; o < total.outer; ++o) {
            std::copy_n(pv.data() + o * w, w, out.data() + o * row + offset);
        }
        offset += w;
    }
    return Tensor<T>::record(std::move(out_shape), std::move(out), parts,
                             [widths, row, outer = total.outer](BackwardContext<T>& ctx) {
                                 std::int64_t off = 0;
                                 for (std::size_t k = 0; k < widths.size(); ++k) {
                                     const std::int64_t w = widths[k];
                                     if (!ctx.grad_in[k].empty()) {
                                         T* g = ctx.grad_in[k].data();
                                         for (std::int64_t o = 0; o < outer; ++o) {
                                             const T* src = ctx.grad_out.data() + o * row + off;
                                             for (std::int64_t i = 0; i < w; ++i) g[o * w + i] += src[i];
                                         }
                                     }
                                     off += w;
                                 }
                             });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions options) {
    if (input.rank() != 4 || weight.rank() != 4 || input.dim(1) != weight.dim(1)) {
        throw DimensionError("conv2d: input " + shape_string(input.shape()) +
                             " does not match weight " + shape_string(weight.shape()));
    }
    const std::int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::int64_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    const std::int64_t s = options.stride, p = options.padding;
    if (s < 1 || p < 0) throw ConfigError("conv2d: stride must be >= 1 and padding >= 0");
    const std::int64_t span_h = h + 2 * p - kh;
    const std::int64_t span_w = w + 2 * p - kw;
    if (span_h < 0 || span_w < 0) {
        throw ConfigError("conv2d: kernel " + shape_string(weight.shape()) +
                          " does not fit padded input " + shape_string(input.shape()));
    }
    if (span_h % s != 0 || span_w % s != 0) {
        throw ConfigError("conv2d: output extent is not integral for input " +
                          shape_string(input.shape()) + ", kernel " + std::to_string(kh) + "x" +
                          std::to_string(kw) + ", stride " + std::to_string(s) + ", padding " +
                          std::to_string(p));
    }
    const std::int64_t oh = span_h / s + 1, ow = span_w / s + 1;
    const bool has_bias = bias.defined();
    if (has_bias && (bias.rank() != 1 || bias.dim(0) != cout)) {
        throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                             std::to_string(cout) + " output channels");
    }

    // Valid output range along one axis for kernel offset k.
    auto out_range = [s, p](std::int64_t k, std::int64_t in_extent, std::int64_t out_extent) {
        // o*s + k - p in [0, in_extent)
        std::int64_t lo = std::max<std::int64_t>(0, (p - k + s - 1) / s);
        if (p - k < 0) lo = 0;
        std::int64_t hi_num = in_extent - 1 + p - k;
        std::int64_t hi = hi_num < 0 ? -1 : std::min(out_extent - 1, hi_num / s);
        return std::pair<std::int64_t, std::int64_t>(lo, hi + 1);
    };

    auto iv = input.values();
    auto wv = weight.values();
    std::vector<T> out(static_cast<std::size_t>(n * cout * oh * ow));
    for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t co = 0; co < cout; ++co) {
            T* po = out.data() + (b * cout + co) * oh * ow;
            const T b0 = has_bias ? bias.values()[static_cast<std::size_t>(co)] : T(0);
            std::fill(po, po + oh * ow, b0);
            for (std::int64_t ci = 0; ci < cin; ++ci) {
                const T* pi = iv.data() + (b * cin + ci) * h * w;
                const T* pw = wv.data() + (co * cin + ci) * kh * kw;
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                    auto [y0, y1] = out_range(ky, h, oh);
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        auto [x0, x1] = out_range(kx, w, ow);
                        const T wk = pw[ky * kw + kx];
                        for (std::int64_t oy = y0; oy < y1; ++oy) {
                            const T* row = pi + (oy * s + ky - p) * w + (kx - p);
                            T* orow = po + oy * ow;
                            if (s == 1) {
                                for (std::int64_t ox = x0; ox < x1; ++ox) orow[ox] += wk * row[ox];
                            } else {
                                for (std::int64_t ox = x0; ox < x1; ++ox) orow[ox] += wk * row[ox * s];
                            }
                        }
                    }
                }
            }
        }
    }

    std::vector<Tensor<T>> inputs{input, weight};
    if (has_bias) inputs.push_back(bias);
    return Tensor<T>::record(
        Shape{n, cout, oh, ow}, std::move(out), inputs, [=](BackwardContext<T>& ctx) {
            const T* go = ctx.grad_out.data();
            const T* pin = ctx.in[0].data();
            const T* pwt = ctx.in[1].data();
            T* gi = ctx.grad_in[0].empty() ? nullptr : ctx.grad_in[0].data();
            T* gw = ctx.grad_in[1].empty() ? nullptr : ctx.grad_in[1].data();
            if (has_bias && !ctx.grad_in[2].empty()) {
                T* gb = ctx.grad_in[2].data();
                for (std::int64_t b = 0; b < n; ++b) {
                    for (std::int64_t co = 0; co < cout; ++co) {
                        const T* g = go + (b * cout + co) * oh * ow;
                        T acc = T(0);
                        for (std::int64_t i = 0; i < oh * ow; ++i) acc += g[i];
                        gb[co] += acc;
                    }
                }
            }
            for (std::int64_t b = 0; b < n; ++b) {
                for (std::int64_t co = 0; co < cout; ++co) {
                    const T* g = go + (b * cout + co) * oh * ow;
                    for (std::int64_t ci = 0; ci < cin; ++ci) {
                        const T* pi = pin + (b * cin + ci) * h * w;
                        const T* pw = pwt + (co * cin + ci) * kh * kw;
                        T* gip = gi ? gi + (b * cin + ci) * h * w : nullptr;
                        T* gwp = gw ? gw + (co * cin + ci) * kh * kw : nullptr;
                        for (std::int64_t ky = 0; ky < kh; ++ky) {
                            auto [y0, y1] = out_range(ky, h, oh);
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                auto [x0, x1] = out_range(kx, w, ow);
                                const T wk = pw[ky * kw + kx];
                                T acc = T(0);
                                for (std::int64_t oy = y0; oy < y1; ++oy) {
                                    const std::int64_t off = (oy * s + ky - p) * w + (kx - p);
                                    const T* grow = g + oy * ow;
                                    const T* row = pi + off;
                                    if (gip) {
                                        T* girow = gip + off;
                                        for (std::int64_t ox = x0; ox < x1; ++ox) girow[ox * s] += wk * grow[ox];
                                    }
                                    if (gwp) {
                                        for (std::int64_t ox = x0; ox < x1; ++ox) acc += grow[ox] * row[ox * s];
                                    }
                                }
                                if (gwp) gwp[ky * kw + kx] += acc;
                            }
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    if (x.rank() < 1) throw DimensionError("layer_norm on a scalar");
    const std::int64_t d = x.dim(-1);
    if (gamma.numel() != d || beta.numel() != d) {
        throw DimensionError("layer_norm: gamma " + shape_string(gamma.shape()) + " / beta " +
                             shape_string(beta.shape()) + " do not match last extent " +
                             std::to_string(d));
    }
    const std::int64_t rows = x.numel() / d;
    auto xv = x.values();
    auto gv = gamma.values();
    auto bv = beta.values();
    std::vector<T> out(xv.size());
    auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = xv.data() + r * d;
        T mu = T(0);
        for (std::int64_t i = 0; i < d; ++i) mu += xr[i];
        mu /= static_cast<T>(d);
        T var = T(0);
        for (std::int64_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= static_cast<T>(d);
        const T rs = T(1) / std::sqrt(var + eps);
        (*rstd)[static_cast<std::size_t>(r)] = rs;
        T* yr = out.data() + r * d;
        for (std::int64_t i = 0; i < d; ++i) {
            yr[i] = (xr[i] - mu) * rs * gv[static_cast<std::size_t>(i)] + bv[static_cast<std::size_t>(i)];
        }
    }
    return Tensor<T>::record(
        x.shape(), std::move(out), {x, gamma, beta}, [rows, d, rstd](BackwardContext<T>& ctx) {
            const T* px = ctx.in[0].data();
            const T* pg = ctx.in[1].data();
            std::vector<T> xhat(static_cast<std::size_t>(d));
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* xr = px + r * d;
                const T* gr = ctx.grad_out.data() + r * d;
                const T rs = (*rstd)[static_cast<std::size_t>(r)];
                T mu = T(0);
                for (std::int64_t i = 0; i < d; ++i) mu += xr[i];
                mu /= static_cast<T>(d);
                for (std::int64_t i = 0; i < d; ++i) xhat[static_cast<std::size_t>(i)] = (xr[i] - mu) * rs;
                if (!ctx.grad_in[1].empty()) {
                    for (std::int64_t i = 0; i < d; ++i) ctx.grad_in[1][static_cast<std::size_t>(i)] += gr[i] * xhat[static_cast<std::size_t>(i)];
                }
                if (!ctx.grad_in[2].empty()) {
                    for (std::int64_t i = 0; i < d; ++i) ctx.grad_in[2][static_cast<std::size_t>(i)] += gr[i];
                }
                if (!ctx.grad_in[0].empty()) {
                    T mean_g = T(0), mean_gx = T(0);
                    for (std::int64_t i = 0; i < d; ++i) {
                        const T gh = gr[i] * pg[i];
                        mean_g += gh;
                        mean_gx += gh * xhat[static_cast<std::size_t>(i)];
                    }
                    mean_g /= static_cast<T>(d);
                    mean_gx /= static_cast<T>(d);
                    T* gx = ctx.grad_in[0].data() + r * d;
                    for (std::int64_t i = 0; i < d; ++i) {
                        gx[i] += rs * (gr[i] * pg[i] - mean_g - xhat[static_cast<std::size_t>(i)] * mean_gx);
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
    const int ax = normalize_axis(axis, x.rank(), "softmax");
    const AxisSplit sp = split_at(x.shape(), ax);
    auto xv = x.values();
    std::vector<T> out(xv.size());
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        for (std::int64_t in = 0; in < sp.inner; ++in) {
            const std::int64_t base = o * sp.extent * sp.inner + in;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::int64_t k = 0; k < sp.extent; ++k) mx = std::max(mx, xv[static_cast<std::size_t>(base + k * sp.inner)]);
            T total = T(0);
            for (std::int64_t k = 0; k < sp.extent; ++k) {
                const auto idx = static_cast<std::size_t>(base + k * sp.inner);
                out[idx] = std::exp(xv[idx] - mx);
                total += out[idx];
            }
            for (std::int64_t k = 0; k < sp.extent; ++k) out[static_cast<std::size_t>(base + k * sp.inner)] /= total;
        }
    }
    return Tensor<T>::record(x.shape(), std::move(out), {x}, [sp](BackwardContext<T>& ctx) {
        for (std::int64_t o = 0; o < sp.outer; ++o) {
            for (std::int64_t in = 0; in < sp.inner; ++in) {
                const std::int64_t base = o * sp.extent * sp.inner + in;
                T dot = T(0);
                for (std::int64_t k = 0; k < sp.extent; ++k) {
                    const auto idx = static_cast<std::size_t>(base + k * sp.inner);
                    dot += ctx.grad_out[idx] * ctx.out[idx];
                }
                for (std::int64_t k = 0; k < sp.extent; ++k) {
                    const auto idx = static_cast<std::size_t>(base + k * sp.inner);
                    ctx.grad_in[0][idx] += ctx.out[idx] * (ctx.grad_out[idx] - dot);
                }
            }
        }
    });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis) {
    const int ax = normalize_axis(axis, x.rank(), "log_softmax");
    const AxisSplit sp = split_at(x.shape(), ax);
    auto xv = x.values();
    std::vector<T> out(xv.size());
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        for (std::int64_t in = 0; in < sp.inner; ++in) {
            const std::int64_t base = o * sp.extent * sp.inner + in;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::int64_t k = 0; k < sp.extent; ++k) mx = std::max(mx, xv[static_cast<std::size_t>(base + k * sp.inner)]);
            T total = T(0);
            for (std::int64_t k = 0; k < sp.extent; ++k) total += std::exp(xv[static_cast<std::size_t>(base + k * sp.inner)] - mx);
            const T lse = mx + std::log(total);
            for (std::int64_t k = 0; k < sp.extent; ++k) {
                const auto idx = static_cast<std::size_t>(base + k * sp.inner);
                out[idx] = xv[idx] - lse;
            }
        }
    }
    return Tensor<T>::record(x.shape(), std::move(out), {x}, [sp](BackwardContext<T>& ctx) {
        for (std::int64_t o = 0; o < sp.outer; ++o) {
            for (std::int64_t in = 0; in < sp.inner; ++in) {
                const std::int64_t base = o * sp.extent * sp.inner + in;
                T total = T(0);
                for (std::int64_t k = 0; k < sp.extent; ++k) total += ctx.grad_out[static_cast<std::size_t>(base + k * sp.inner)];
                for (std::int64_t k = 0; k < sp.extent; ++k) {
                    const auto idx = static_cast<std::size_t>(base + k * sp.inner);
                    ctx.grad_in[0][idx] += ctx.grad_out[idx] - std::exp(ctx.out[idx]) * total;
                }
            }
        }
    });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    auto xv = x.values();
    std::vector<T> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
    }
    return Tensor<T>::record(x.shape(), std::move(out), {x}, [inv_sqrt2](BackwardContext<T>& ctx) {
        const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
        for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) {
            const T v = ctx.in[0][i];
            const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
            const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
            ctx.grad_in[0][i] += ctx.grad_out[i] * (cdf + v * pdf);
        }
    });
}

namespace {

// Source taps along one axis for align_corners=false bilinear resampling.
template <typename T>
struct Taps {
    std::vector<std::int64_t> lo, hi;
    std::vector<T> frac;
};

template <typename T>
Taps<T> bilinear_taps(std::int64_t in_extent, int factor) {
    const std::int64_t out_extent = in_extent * factor;
    Taps<T> t;
    t.lo.resize(static_cast<std::size_t>(out_extent));
    t.hi.resize(static_cast<std::size_t>(out_extent));
    t.frac.resize(static_cast<std::size_t>(out_extent));
    for (std::int64_t o = 0; o < out_extent; ++o) {
        T src = (static_cast<T>(o) + T(0.5)) / static_cast<T>(factor) - T(0.5);
        if (src < T(0)) src = T(0);
        auto lo = static_cast<std::int64_t>(std::floor(src));
        lo = std::min(lo, in_extent - 1);
        const std::int64_t hi = std::min(lo + 1, in_extent - 1);
        t.lo[static_cast<std::size_t>(o)] = lo;
        t.hi[static_cast<std::size_t>(o)] = hi;
        t.frac[static_cast<std::size_t>(o)] = src - static_cast<T>(lo);
    }
    return t;
}

}  // namespace

template <typename T>
Tensor<T> upsample(const Tensor<T>& x, int factor, UpsampleMode mode) {
    if (x.rank() != 4) throw DimensionError("upsample expects NCHW, got " + shape_string(x.shape()));
    if (factor < 1) throw ConfigError("upsample factor must be >= 1");
    const std::int64_t planes = x.dim(0) * x.dim(1);
    const std::int64_t h = x.dim(2), w = x.dim(3);
    const std::int64_t oh = h * factor, ow = w * factor;
    Shape out_shape{x.dim(0), x.dim(1), oh, ow};
    auto xv = x.values();
    std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));

    if (mode == UpsampleMode::nearest) {
        for (std::int64_t pl = 0; pl < planes; ++pl) {
            const T* src = xv.data() + pl * h * w;
            T* dst = out.data() + pl * oh * ow;
            for (std::int64_t oy = 0; oy < oh; ++oy) {
                for (std::int64_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = src[(oy / factor) * w + ox / factor];
            }
        }
        return Tensor<T>::record(std::move(out_shape), std::move(out), {x},
                                 [=](BackwardContext<T>& ctx) {
                                     for (std::int64_t pl = 0; pl < planes; ++pl) {
                                         const T* g = ctx.grad_out.data() + pl * oh * ow;
                                         T* gi = ctx.grad_in[0].data() + pl * h * w;
                                         for (std::int64_t oy = 0; oy < oh; ++oy) {
                                             for (std::int64_t ox = 0; ox < ow; ++ox) {
                                                 gi[(oy / factor) * w + ox / factor] += g[oy * ow + ox];
                                             }
                                         }
                                     }
                                 });
    }

    auto ty = std::make_shared<Taps<T>>(bilinear_taps<T>(h, factor));
    auto tx = std::make_shared<Taps<T>>(bilinear_taps<T>(w, factor));
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* src = xv.data() + pl * h * w;
        T* dst = out.data() + pl * oh * ow;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            const auto y = static_cast<std::size_t>(oy);
            const T* r0 = src + ty->lo[y] * w;
            const T* r1 = src + ty->hi[y] * w;
            const T fy = ty->frac[y];
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const auto xi = static_cast<std::size_t>(ox);
                const T fx = tx->frac[xi];
                const T top = r0[tx->lo[xi]] * (T(1) - fx) + r0[tx->hi[xi]] * fx;
                const T bot = r1[tx->lo[xi]] * (T(1) - fx) + r1[tx->hi[xi]] * fx;
                dst[oy * ow + ox] = top * (T(1) - fy) + bot * fy;
            }
        }
    }
    return Tensor<T>::record(std::move(out_shape), std::move(out), {x}, [=](BackwardContext<T>& ctx) {
        for (std::int64_t pl = 0; pl < planes; ++pl) {
            const T* g = ctx.grad_out.data() + pl * oh * ow;
            T* gi = ctx.grad_in[0].data() + pl * h * w;
            for (std::int64_t oy = 0; oy < oh; ++oy) {
                const auto y = static_cast<std::size_t>(oy);
                T* r0 = gi + ty->lo[y] * w;
                T* r1 = gi + ty->hi[y] * w;
                const T fy = ty->frac[y];
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    const auto xi = static_cast<std::size_t>(ox);
                    const T fx = tx->frac[xi];
                    const T v = g[oy * ow + ox];
                    r0[tx->lo[xi]] += v * (T(1) - fy) * (T(1) - fx);
                    r0[tx->hi[xi]] += v * (T(1) - fy) * fx;
                    r1[tx->lo[xi]] += v * fy * (T(1) - fx);
                    r1[tx->hi[xi]] += v * fy * fx;
                }
            }
        }
    });
}

#define OMNIUNET_INSTANTIATE_OPS(T)                                                              \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> scale(const Tensor<T>&, T);                                               \
    template Tensor<T> add_scalar(const Tensor<T>&, T);                                          \
    template Tensor<T> add_broadcast(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> sum(const Tensor<T>&);                                                    \
    template Tensor<T> mean(const Tensor<T>&);                                                   \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> transpose(const Tensor<T>&);                                              \
    template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
    template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);                       \
    template Tensor<T> remap(const Tensor<T>&, Shape, std::vector<std::int64_t>);                \
    template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                               \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dOptions); \
    template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);      \
    template Tensor<T> softmax(const Tensor<T>&, int);                                           \
    template Tensor<T> log_softmax(const Tensor<T>&, int);                                       \
    template Tensor<T> gelu(const Tensor<T>&);                                                   \
    template Tensor<T> upsample(const Tensor<T>&, int, UpsampleMode);

OMNIUNET_INSTANTIATE_OPS(float)
OMNIUNET_INSTANTIATE_OPS(double)

#undef OMNIUNET_INSTANTIATE_OPS

}  // namespace omniunet
