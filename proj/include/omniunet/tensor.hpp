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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace omniunet {

using Shape = std::vector<std::int64_t>;

inline constexpr int kMaxRank = 4;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Values handed to an operation's adjoint. grad_in[i] is empty when input i
// does not take part in differentiation.
template <typename T>
struct BackwardContext {
    std::span<const T> out;
    std::span<const T> grad_out;
    std::vector<std::span<const T>> in;
    std::vector<std::span<T>> grad_in;
};

template <typename T>
using BackwardFn = std::function<void(BackwardContext<T>&)>;

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<T> pass_grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn<T> backward;
};

}  // namespace detail

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool enabled();

private:
    bool previous_;
};

/// Dense row-major array of rank <= 4 with an optional reverse-mode record.
///
/// Copies share storage and graph position (handle semantics). Values of a
/// tensor produced by an operation are immutable; leaves (parameters, inputs)
/// may be written through mutable_values().
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    // Creates the output of a differentiable operation. Graph edges are only
    // kept when recording is enabled and some input requires a gradient.
    static Tensor record(Shape shape, std::vector<T> values,
                         const std::vector<Tensor>& inputs, BackwardFn<T> backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    std::int64_t dim(int axis) const;
    std::int64_t numel() const;

    std::span<const T> values() const;
    std::span<T> mutable_values();
    T item() const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const T> grad() const;
    std::span<T> mutable_grad();
    void zero_grad();
    void clear_grad();

    // Accumulates d(this)/d(t) into t.grad() for every tensor t reachable
    // through recorded operations. Requires a single-element tensor.
    void backward() const;

    // Same values, no graph, no gradient.
    Tensor detach() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node<T>> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace omniunet
