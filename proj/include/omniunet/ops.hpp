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
#include <vector>

#include "omniunet/tensor.hpp"

// Differentiable tensor operations. Every function records its adjoint when
// graph recording is active; all are pure in the forward direction.
namespace omniunet {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value);

// b's shape must equal the trailing extents of a; b is tiled over the rest.
template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

// a: [..., m, k], b: [..., k, n]. Leading extents must match, or one operand
// may be a plain matrix that is reused for every leading index.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

// x: [..., in], weight: [out, in], bias: [out] or undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& axes);

// out[i] = a[source[i]], or 0 where source[i] < 0. The adjoint scatter-adds.
template <typename T>
Tensor<T> remap(const Tensor<T>& a, Shape shape, std::vector<std::int64_t> source);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

struct Conv2dOptions {
    int stride = 1;
    int padding = 0;
};

// Cross-correlation. input [N,Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout]
// or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions options = {});

// Normalizes over the last axis, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis);
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis);

// Exact form x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

enum class UpsampleMode { nearest, bilinear };

// NCHW spatial upsampling by an integer factor. Bilinear follows the
// align_corners=false convention.
template <typename T>
Tensor<T> upsample(const Tensor<T>& x, int factor, UpsampleMode mode);

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x, UpsampleMode mode) {
    return upsample(x, 2, mode);
}

}  // namespace omniunet
