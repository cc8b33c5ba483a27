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

#include "omniunet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "omniunet/error.hpp"
#include "omniunet/ops.hpp"

namespace omniunet {

namespace {

template <typename T>
void check_target(const Tensor<T>& x, const LabelMask& target, const char* op) {
    if (x.rank() != 4) throw DimensionError(std::string(op) + " expects [N,K,H,W], got " + shape_string(x.shape()));
    if (x.dim(0) != target.batch || x.dim(2) != target.height || x.dim(3) != target.width) {
        throw DataError(std::string(op) + ": target " + std::to_string(target.batch) + "x" +
                        std::to_string(target.height) + "x" + std::to_string(target.width) +
                        " does not match " + shape_string(x.shape()));
    }
    const auto k = x.dim(1);
    for (auto v : target.labels) {
        if (v >= k) {
            throw DataError(std::string(op) + ": target class " + std::to_string(v) +
                            " out of range for " + std::to_string(k) + " classes");
        }
    }
}

}  // namespace

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const LabelMask& target) {
    check_target(logits, target, "cross_entropy");
    const std::int64_t n = logits.dim(0), k = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
    const std::int64_t pixels = n * plane;
    if (pixels == 0) throw DataError("cross_entropy over zero pixels");
    auto v = logits.values();
    // Softmax kept for the adjoint: dL/dz = (softmax - onehot) / pixels.
    auto probs = std::make_shared<std::vector<T>>(v.size());
    T total = T(0);
    for (std::int64_t b = 0; b < n; ++b) {
        const T* z = v.data() + b * k * plane;
        T* p = probs->data() + b * k * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            T mx = -std::numeric_limits<T>::infinity();
            for (std::int64_t c = 0; c < k; ++c) mx = std::max(mx, z[c * plane + i]);
            T s = T(0);
            for (std::int64_t c = 0; c < k; ++c) {
                p[c * plane + i] = std::exp(z[c * plane + i] - mx);
                s += p[c * plane + i];
            }
            for (std::int64_t c = 0; c < k; ++c) p[c * plane + i] /= s;
            const std::int64_t t = target.labels[static_cast<std::size_t>(b * plane + i)];
            total += mx + std::log(s) - z[t * plane + i];
        }
    }
    const T inv = T(1) / static_cast<T>(pixels);
    auto labels = std::make_shared<std::vector<std::uint8_t>>(target.labels);
    return Tensor<T>::record(Shape{}, {total * inv}, {logits}, [=](BackwardContext<T>& ctx) {
        const T g = ctx.grad_out[0] * inv;
        T* gz = ctx.grad_in[0].data();
        for (std::int64_t b = 0; b < n; ++b) {
            for (std::int64_t c = 0; c < k; ++c) {
                const T* p = probs->data() + (b * k + c) * plane;
                T* gp = gz + (b * k + c) * plane;
                const std::uint8_t* lab = labels->data() + b * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    gp[i] += g * (p[i] - (lab[i] == c ? T(1) : T(0)));
                }
            }
        }
    });
}

template <typename T>
Tensor<T> soft_dice(const Tensor<T>& probs, const LabelMask& target, int c, double eps) {
    check_target(probs, target, "soft_dice");
    const std::int64_t n = probs.dim(0), k = probs.dim(1), plane = probs.dim(2) * probs.dim(3);
    if (c < 0 || c >= k) throw DimensionError("soft_dice: class " + std::to_string(c) + " out of range");
    auto v = probs.values();
    T inter = T(0), psum = T(0), gsum = T(0);
    for (std::int64_t b = 0; b < n; ++b) {
        const T* p = v.data() + (b * k + c) * plane;
        const std::uint8_t* lab = target.labels.data() + b * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            psum += p[i];
            if (lab[i] == c) {
                inter += p[i];
                gsum += T(1);
            }
        }
    }
    const T e = static_cast<T>(eps);
    const T num = T(2) * inter + e;
    const T den = psum + gsum + e;
    if (den == T(0)) throw DataError("soft_dice: zero denominator (use eps > 0 for absent classes)");
    auto labels = std::make_shared<std::vector<std::uint8_t>>(target.labels);
    return Tensor<T>::record(Shape{}, {num / den}, {probs}, [=](BackwardContext<T>& ctx) {
        const T g = ctx.grad_out[0];
        const T on = g * (T(2) * den - num) / (den * den);  // pixel of class c
        const T off = g * (-num) / (den * den);             // any other pixel
        for (std::int64_t b = 0; b < n; ++b) {
            T* gp = ctx.grad_in[0].data() + (b * k + c) * plane;
            const std::uint8_t* lab = labels->data() + b * plane;
            for (std::int64_t i = 0; i < plane; ++i) gp[i] += lab[i] == c ? on : off;
        }
    });
}

template <typename T>
Tensor<T> composite_loss(const Tensor<T>& logits, const LabelMask& target, const ClassSet& classes,
                         LossOptions options) {
    if (logits.rank() != 4 || logits.dim(1) != classes.size()) {
        throw DimensionError("composite_loss: logits " + shape_string(logits.shape()) + " do not carry " +
                             std::to_string(classes.size()) + " class channels");
    }
    Tensor<T> loss = cross_entropy(logits, target);
    const int k = classes.size();
    if (k < 2) return loss;
    Tensor<T> probs = softmax(logits, 1);
    Tensor<T> dice_loss;
    for (int c = 0; c < k; ++c) {
        if (c == classes.void_index()) continue;
        Tensor<T> term = add_scalar(scale(soft_dice(probs, target, c, options.dice_smoothing), T(-1)), T(1));
        dice_loss = dice_loss.defined() ? add(dice_loss, term) : term;
    }
    return add(loss, scale(dice_loss, T(1) / static_cast<T>(k - 1)));
}

template Tensor<float> cross_entropy(const Tensor<float>&, const LabelMask&);
template Tensor<double> cross_entropy(const Tensor<double>&, const LabelMask&);
template Tensor<float> soft_dice(const Tensor<float>&, const LabelMask&, int, double);
template Tensor<double> soft_dice(const Tensor<double>&, const LabelMask&, int, double);
template Tensor<float> composite_loss(const Tensor<float>&, const LabelMask&, const ClassSet&, LossOptions);
template Tensor<double> composite_loss(const Tensor<double>&, const LabelMask&, const ClassSet&, LossOptions);

}  // namespace omniunet
