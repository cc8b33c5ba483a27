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

#include <nlohmann/json.hpp>

#include "omniunet/layers.hpp"

namespace omniunet {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

void to_json(nlohmann::json& j, const AdamWConfig& c);
void from_json(const nlohmann::json& j, AdamWConfig& c);

/// Adam with decoupled weight decay and bias-corrected moments.
///
/// Holds a reference to the parameter list; moment buffers follow its order.
template <typename T>
class AdamW {
public:
    AdamW(ParameterList<T>& params, double learning_rate, AdamWConfig config = {});

    // Applies one update from the accumulated gradients, then clears them.
    // Every trainable parameter must carry a gradient (TrainingError otherwise).
    void step();

    std::int64_t steps() const { return t_; }
    double learning_rate() const { return lr_; }

private:
    ParameterList<T>* params_;
    double lr_;
    AdamWConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Scales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before scaling. max_norm <= 0 only measures.
template <typename T>
double clip_grad_norm(ParameterList<T>& params, double max_norm);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace omniunet
