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
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "omniunet/ops.hpp"
#include "omniunet/tensor.hpp"

namespace omniunet {

using Rng = std::mt19937_64;

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
};

// Ordered, name-unique view over a model's parameters. Tensors are shared
// handles, so updates through the list are visible to the owning layers.
template <typename T>
class ParameterList {
public:
    void add(std::string name, Tensor<T> tensor, bool trainable = true);

    const Parameter<T>* find(const std::string& name) const;
    Parameter<T>* find(const std::string& name) {
        return const_cast<Parameter<T>*>(std::as_const(*this).find(name));
    }
    std::size_t size() const { return items_.size(); }
    std::int64_t element_count() const;

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    void zero_grad();

private:
    std::vector<Parameter<T>> items_;
};

// Truncated normal (cut at two standard deviations).
template <typename T>
Tensor<T> trunc_normal(Shape shape, double stddev, Rng& rng);

// U(-bound, bound).
template <typename T>
Tensor<T> uniform(Shape shape, double bound, Rng& rng);

template <typename T>
struct Linear {
    Tensor<T> weight;  // [out, in]
    Tensor<T> bias;    // [out] or undefined

    Linear() = default;
    Linear(int in, int out, bool with_bias, Rng& rng);

    Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
    void collect(const std::string& prefix, ParameterList<T>& out) const;
};

template <typename T>
struct LayerNorm {
    Tensor<T> weight;
    Tensor<T> bias;
    T eps = T(1e-5);

    LayerNorm() = default;
    explicit LayerNorm(int dim);

    Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, weight, bias, eps); }
    void collect(const std::string& prefix, ParameterList<T>& out) const;
};

// Conv weights use the fan-in uniform init of the common frameworks.
template <typename T>
struct Conv2d {
    Tensor<T> weight;  // [out, in, k, k]
    Tensor<T> bias;
    Conv2dOptions options;

    Conv2d() = default;
    Conv2d(int in, int out, int kernel, Conv2dOptions opts, Rng& rng);

    Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, options); }
    void collect(const std::string& prefix, ParameterList<T>& out) const;
};

}  // namespace omniunet
