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

#include "omniunet/optimizer.hpp"

#include <cmath>

#include "omniunet/error.hpp"

namespace omniunet {

void to_json(nlohmann::json& j, const AdamWConfig& c) {
    j = {{"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}, {"weight_decay", c.weight_decay}};
}

void from_json(const nlohmann::json& j, AdamWConfig& c) {
    AdamWConfig d;
    c.beta1 = j.value("beta1", d.beta1);
    c.beta2 = j.value("beta2", d.beta2);
    c.eps = j.value("eps", d.eps);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
}

template <typename T>
AdamW<T>::AdamW(ParameterList<T>& params, double learning_rate, AdamWConfig config)
    : params_(&params), lr_(learning_rate), cfg_(config) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0)) {
        throw ConfigError("optimizer betas must lie in [0, 1)");
    }
    if (!(cfg_.eps > 0.0) || cfg_.weight_decay < 0.0) throw ConfigError("optimizer eps must be > 0, weight_decay >= 0");
    for (const auto& p : params) {
        m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
    }
}

template <typename T>
void AdamW<T>::step() {
    if (m_.size() != params_->size()) throw TrainingError("parameter list changed after optimizer construction");
    for (const auto& p : *params_) {
        if (p.trainable && !p.tensor.has_grad()) {
            throw TrainingError("parameter '" + p.name + "' has no gradient (disconnected from the loss)");
        }
    }
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double decay = 1.0 - lr_ * cfg_.weight_decay;
    std::size_t k = 0;
    for (auto& p : *params_) {
        auto& m = m_[k];
        auto& v = v_[k];
        ++k;
        if (!p.trainable) continue;
        auto w = p.tensor.mutable_values();
        auto g = p.tensor.grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
            w[i] = static_cast<T>(static_cast<double>(w[i]) * decay - lr_ * update);
        }
        p.tensor.clear_grad();
    }
}

template <typename T>
double clip_grad_norm(ParameterList<T>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (T g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / (norm + 1e-6);
        for (auto& p : params) {
            if (!p.tensor.has_grad()) continue;
            for (T& g : p.tensor.mutable_grad()) g = static_cast<T>(g * s);
        }
    }
    return norm;
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm(ParameterList<float>&, double);
template double clip_grad_norm(ParameterList<double>&, double);

}  // namespace omniunet
