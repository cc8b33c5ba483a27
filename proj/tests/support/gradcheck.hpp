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

// Central finite-difference oracle. Independent of the adjoint rules: it only
// perturbs leaf values and re-runs the forward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "omniunet/ops.hpp"
#include "omniunet/tensor.hpp"

namespace omniunet::testing {

using TensorD = Tensor<double>;

inline TensorD random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true, double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = dist(rng);
    return TensorD(std::move(shape), std::move(v), requires_grad);
}

// Reduces an arbitrary output to a scalar with fixed random weights so every
// output element influences the check.
inline TensorD project(const TensorD& y, std::uint64_t seed = 99) {
    std::mt19937_64 rng(seed);
    TensorD w = random_tensor(y.shape(), rng, false);
    return sum(mul(y, w));
}

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t worst_input = 0;
    // Same measure over the concatenation of every perturbed entry. Inputs
    // whose true gradient sits at the finite-difference noise floor do not
    // dominate it.
    double combined_relative_error = 0.0;
};

// Norm-wise relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
// per input, maximized over inputs. When `max_entries` is nonzero only that
// many evenly spaced entries of each input are perturbed.
inline GradCheckResult grad_check(const std::function<TensorD()>& loss_fn, std::vector<TensorD> inputs,
                                  double step = 1e-5, std::size_t max_entries = 0) {
    for (auto& t : inputs) t.clear_grad();
    loss_fn().backward();
    GradCheckResult result;
    double all_diff2 = 0.0, all_a2 = 0.0, all_n2 = 0.0;
    for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
        auto& t = inputs[idx];
        std::vector<double> analytic(t.grad().begin(), t.grad().end());
        const std::size_t n = analytic.size();
        std::vector<std::size_t> picks;
        if (max_entries == 0 || max_entries >= n) {
            for (std::size_t i = 0; i < n; ++i) picks.push_back(i);
        } else {
            for (std::size_t k = 0; k < max_entries; ++k) picks.push_back(k * n / max_entries);
        }
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        auto values = t.mutable_values();
        for (std::size_t i : picks) {
            const double orig = values[i];
            values[i] = orig + step;
            const double up = loss_fn().item();
            values[i] = orig - step;
            const double down = loss_fn().item();
            values[i] = orig;
            const double numeric = (up - down) / (2.0 * step);
            diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
            a2 += analytic[i] * analytic[i];
            n2 += numeric * numeric;
        }
        all_diff2 += diff2;
        all_a2 += a2;
        all_n2 += n2;
        const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
        const double err = std::sqrt(diff2) / denom;
        if (err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_input = idx;
        }
        result.checked += picks.size();
    }
    result.combined_relative_error =
        std::sqrt(all_diff2) / std::max({std::sqrt(all_a2), std::sqrt(all_n2), 1e-12});
    return result;
}

}  // namespace omniunet::testing
