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

#include "omniunet/layers.hpp"

#include <cmath>

#include "omniunet/error.hpp"

namespace omniunet {

template <typename T>
void ParameterList<T>::add(std::string name, Tensor<T> tensor, bool trainable) {
    if (find(name) != nullptr) throw ConfigError("duplicate parameter name " + name);
    tensor.set_requires_grad(trainable);
    items_.push_back(Parameter<T>{std::move(name), std::move(tensor), trainable});
}

template <typename T>
const Parameter<T>* ParameterList<T>::find(const std::string& name) const {
    for (const auto& p : items_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

template <typename T>
std::int64_t ParameterList<T>::element_count() const {
    std::int64_t n = 0;
    for (const auto& p : items_) n += p.tensor.numel();
    return n;
}

template <typename T>
void ParameterList<T>::zero_grad() {
    for (auto& p : items_) p.tensor.clear_grad();
}

template <typename T>
Tensor<T> trunc_normal(Shape shape, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    auto n = static_cast<std::size_t>(shape_numel(shape));
    std::vector<T> v(n);
    for (auto& x : v) {
        double s;
        do {
            s = dist(rng);
        } while (std::abs(s) > 2.0 * stddev);
        x = static_cast<T>(s);
    }
    return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
Tensor<T> uniform(Shape shape, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto n = static_cast<std::size_t>(shape_numel(shape));
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
Linear<T>::Linear(int in, int out, bool with_bias, Rng& rng)
    : weight(trunc_normal<T>({out, in}, 0.02, rng)) {
    if (with_bias) bias = Tensor<T>::zeros({out}, true);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    out.add(prefix + ".weight", weight);
    if (bias.defined()) out.add(prefix + ".bias", bias);
}

template <typename T>
LayerNorm<T>::LayerNorm(int dim) : weight(Tensor<T>::full({dim}, T(1), true)), bias(Tensor<T>::zeros({dim}, true)) {}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    out.add(prefix + ".weight", weight);
    out.add(prefix + ".bias", bias);
}

template <typename T>
Conv2d<T>::Conv2d(int in, int out, int kernel, Conv2dOptions opts, Rng& rng) : options(opts) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
    weight = uniform<T>({out, in, kernel, kernel}, bound, rng);
    bias = uniform<T>({out}, bound, rng);
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
    out.add(prefix + ".weight", weight);
    out.add(prefix + ".bias", bias);
}

template class ParameterList<float>;
template class ParameterList<double>;
template Tensor<float> trunc_normal(Shape, double, Rng&);
template Tensor<double> trunc_normal(Shape, double, Rng&);
template Tensor<float> uniform(Shape, double, Rng&);
template Tensor<double> uniform(Shape, double, Rng&);
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct Conv2d<float>;
template struct Conv2d<double>;

}  // namespace omniunet
