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

#include "omniunet/class_set.hpp"
#include "omniunet/label_mask.hpp"
#include "omniunet/tensor.hpp"

namespace omniunet {

// Mean per-pixel cross-entropy of [N,K,H,W] logits against class indices.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const LabelMask& target);

// Smoothed soft Dice of class c over the whole batch:
//   (2 * sum(p_c * g_c) + eps) / (sum(p_c) + sum(g_c) + eps)
// with g the one-hot target.
template <typename T>
Tensor<T> soft_dice(const Tensor<T>& probs, const LabelMask& target, int c, double eps = 1.0);

struct LossOptions {
    double dice_smoothing = 1.0;
};

/// Cross-entropy over all classes plus the mean Dice loss (1 - soft Dice) of
/// every class except void.
template <typename T>
Tensor<T> composite_loss(const Tensor<T>& logits, const LabelMask& target, const ClassSet& classes,
                         LossOptions options = {});

}  // namespace omniunet
