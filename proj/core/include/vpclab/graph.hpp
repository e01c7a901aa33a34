#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "vpclab/tensor.hpp"

namespace vpclab::ad {

/// Handle to a node of a Graph. Only meaningful for the graph that issued it.
struct Var {
    static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t id = npos;

    bool valid() const { return id != npos; }
    friend bool operator==(Var, Var) = default;
};

/// Tape of executed operations. Nodes are appended in execution order, so the
/// node vector is already a topological order and backward() walks it in
/// reverse. Not thread-safe; each worker owns its graphs.
template <typename T>
class Graph {
public:
    /// Accumulates the node's gradient into its inputs. Called at most once
    /// per backward pass.
    using BackwardFn = std::function<void(Graph&, Var self)>;

    Var leaf(Tensor<T> value, bool requires_grad = true);
    Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

    /// Appends an operation result. The backward function is kept only when
    /// at least one input requires a gradient. Throws NumericError if the
    /// value is not finite.
    Var record(const char* op, Tensor<T> value, std::initializer_list<Var> inputs,
               BackwardFn backward);
    Var record(const char* op, Tensor<T> value, std::vector<Var> inputs, BackwardFn backward);

    const Tensor<T>& value(Var v) const { return node(v).value; }
    const Shape& shape(Var v) const { return node(v).value.shape; }
    std::span<const T> values(Var v) const { return node(v).value.data; }
    T item(Var v) const;

    bool requires_grad(Var v) const { return node(v).requires_grad; }
    const char* op(Var v) const { return node(v).op; }
    std::span<const Var> inputs(Var v) const { return node(v).inputs; }

    /// Gradient of the last backward() loss w.r.t. v. Empty when no gradient
    /// reached the node.
    std::span<const T> grad(Var v) const { return node(v).grad; }

    /// Mutable gradient buffer, zero-allocated on first use. For BackwardFn
    /// implementations.
    std::span<T> grad_accum(Var v);

    /// Reverse pass from a one-element loss. Clears previous gradients first.
    void backward(Var loss);

    /// While alive, recorded nodes never require gradients.
    class NoGradGuard {
    public:
        explicit NoGradGuard(Graph& g) : graph_(g), previous_(g.grad_enabled_) { g.grad_enabled_ = false; }
        ~NoGradGuard() { graph_.grad_enabled_ = previous_; }
        NoGradGuard(const NoGradGuard&) = delete;
        NoGradGuard& operator=(const NoGradGuard&) = delete;

    private:
        Graph& graph_;
        bool previous_;
    };

    NoGradGuard no_grad() { return NoGradGuard(*this); }
    bool grad_enabled() const { return grad_enabled_; }

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

    /// Number of input edges along which gradient can flow.
    std::size_t gradient_edge_count() const;

private:
    struct Node {
        const char* op = "";
        Tensor<T> value;
        std::vector<T> grad;
        std::vector<Var> inputs;
        BackwardFn backward;
        bool requires_grad = false;
    };

    const Node& node(Var v) const;
    Node& node(Var v);

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
};

extern template class Graph<float>;
extern template class Graph<double>;

} // namespace vpclab::ad
