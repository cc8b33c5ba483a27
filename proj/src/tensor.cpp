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

#include "omniunet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "omniunet/error.hpp"

namespace omniunet {

namespace {

thread_local bool no_grad_active = false;

void check_shape(const Shape& shape) {
    if (shape.size() > static_cast<std::size_t>(kMaxRank)) {
        throw DimensionError("tensor rank " + std::to_string(shape.size()) +
                             " exceeds the supported maximum of 4: " + shape_string(shape));
    }
    for (auto extent : shape) {
        if (extent < 0) throw DimensionError("negative extent in shape " + shape_string(shape));
    }
}

}  // namespace

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto extent : shape) n *= extent;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out << ", ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

NoGradGuard::NoGradGuard() : previous_(no_grad_active) { no_grad_active = true; }
NoGradGuard::~NoGradGuard() { no_grad_active = previous_; }
bool NoGradGuard::enabled() { return no_grad_active; }

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
    check_shape(shape);
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
        throw DimensionError("shape " + shape_string(shape) + " holds " +
                             std::to_string(shape_numel(shape)) + " elements but " +
                             std::to_string(values.size()) + " values were given");
    }
    node_ = std::make_shared<detail::Node<T>>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    check_shape(shape);
    auto n = static_cast<std::size_t>(shape_numel(shape));
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::record(Shape shape, std::vector<T> values, const std::vector<Tensor>& inputs,
                            BackwardFn<T> backward) {
    Tensor result(std::move(shape), std::move(values));
    if (no_grad_active) return result;
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor& t) { return t.defined() && t.requires_grad(); });
    if (!any) return result;
    auto& node = *result.node_;
    node.requires_grad = true;
    node.inputs.reserve(inputs.size());
    for (const auto& t : inputs) node.inputs.push_back(t.node_);
    node.backward = std::move(backward);
    return result;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
    if (!node_) throw UsageError("shape() on an undefined tensor");
    return node_->shape;
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
    int r = rank();
    int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_string(shape()));
    }
    return node_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
std::int64_t Tensor<T>::numel() const {
    return static_cast<std::int64_t>(node_ ? node_->value.size() : 0);
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
    if (!node_) throw UsageError("values() on an undefined tensor");
    return node_->value;
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
    if (!node_) throw UsageError("mutable_values() on an undefined tensor");
    if (node_->backward) throw UsageError("values of an operation result are immutable");
    return node_->value;
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) {
        throw UsageError("item() requires a single-element tensor, got shape " +
                         shape_string(shape()));
    }
    return node_->value[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
    return node_ && node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
    if (!node_) throw UsageError("set_requires_grad() on an undefined tensor");
    if (!is_leaf()) throw UsageError("requires_grad can only be changed on leaf tensors");
    node_->requires_grad = flag;
}

template <typename T>
bool Tensor<T>::is_leaf() const {
    return node_ && !node_->backward;
}

template <typename T>
bool Tensor<T>::has_grad() const {
    return node_ && !node_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
    if (!has_grad()) throw UsageError("tensor has no gradient");
    return node_->grad;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
    if (!has_grad()) throw UsageError("tensor has no gradient");
    return node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::clear_grad() {
    if (node_) {
        node_->grad.clear();
        node_->grad.shrink_to_fit();
    }
}

template <typename T>
void Tensor<T>::backward() const {
    if (!node_) throw UsageError("backward() on an undefined tensor");
    if (node_->value.size() != 1) {
        throw UsageError("backward() requires a scalar loss, got shape " +
                         shape_string(node_->shape));
    }
    if (!node_->requires_grad) return;

    using NodePtr = detail::Node<T>*;
    // Iterative post-order DFS gives a topological order (inputs first).
    std::vector<NodePtr> order;
    std::unordered_set<NodePtr> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            NodePtr child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (NodePtr node : order) node->pass_grad.assign(node->value.size(), T(0));
    node_->pass_grad[0] = T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodePtr node = *it;
        if (!node->backward) continue;
        BackwardContext<T> ctx;
        ctx.out = node->value;
        ctx.grad_out = node->pass_grad;
        ctx.in.reserve(node->inputs.size());
        ctx.grad_in.reserve(node->inputs.size());
        for (const auto& input : node->inputs) {
            ctx.in.emplace_back(input->value);
            if (input->requires_grad) {
                ctx.grad_in.emplace_back(input->pass_grad);
            } else {
                ctx.grad_in.emplace_back();
            }
        }
        node->backward(ctx);
    }

    // Per-pass buffers are folded in last so repeated passes add whole gradients.
    for (NodePtr node : order) {
        if (node->grad.empty()) {
            node->grad = std::move(node->pass_grad);
        } else {
            for (std::size_t i = 0; i < node->grad.size(); ++i) node->grad[i] += node->pass_grad[i];
        }
        node->pass_grad.clear();
        node->pass_grad.shrink_to_fit();
    }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return Tensor(shape(), node_->value);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace omniunet
