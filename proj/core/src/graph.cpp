#include "vpclab/graph.hpp"

#include <string>

namespace vpclab::ad {

template <typename T>
auto Graph<T>::node(Var v) const -> const Node&
{
    if (v.id >= nodes_.size())
        throw ContractError("graph: unknown variable " + std::to_string(v.id));
    return nodes_[v.id];
}

template <typename T>
auto Graph<T>::node(Var v) -> Node&
{
    if (v.id >= nodes_.size())
        throw ContractError("graph: unknown variable " + std::to_string(v.id));
    return nodes_[v.id];
}

template <typename T>
Var Graph<T>::leaf(Tensor<T> value, bool requires_grad)
{
    if (!all_finite<T>(value.data))
        throw NumericError("graph: non-finite leaf value");
    Node n;
    n.requires_grad = requires_grad && grad_enabled_;
    n.op = n.requires_grad ? "leaf" : "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::record(const char* op, Tensor<T> value, std::initializer_list<Var> inputs,
                     BackwardFn backward)
{
    return record(op, std::move(value), std::vector<Var>(inputs), std::move(backward));
}

template <typename T>
Var Graph<T>::record(const char* op, Tensor<T> value, std::vector<Var> inputs,
                     BackwardFn backward)
{
    if (!all_finite<T>(value.data))
        throw NumericError(std::string("graph: non-finite value produced by ") + op);
    Node n;
    n.op = op;
    n.value = std::move(value);
    for (Var in : inputs)
        n.requires_grad = n.requires_grad || node(in).requires_grad;
    n.requires_grad = n.requires_grad && grad_enabled_;
    n.inputs = std::move(inputs);
    if (n.requires_grad)
        n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
T Graph<T>::item(Var v) const
{
    const auto& n = node(v);
    if (n.value.size() != 1)
        throw ContractError(std::string("graph: item() on non-scalar ") + n.op + " "
                            + shape_str(n.value.shape));
    return n.value.data[0];
}

template <typename T>
std::span<T> Graph<T>::grad_accum(Var v)
{
    auto& n = node(v);
    if (n.grad.empty())
        n.grad.assign(n.value.size(), T(0));
    return n.grad;
}

template <typename T>
void Graph<T>::backward(Var loss)
{
    auto& root = node(loss);
    if (root.value.size() != 1)
        throw ContractError("backward: loss must be a scalar, got " + shape_str(root.value.shape));
    for (auto& n : nodes_)
        n.grad.clear();
    if (!root.requires_grad)
        return;
    root.grad.assign(1, T(1));

    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty() || !n.backward)
            continue;
        if (!all_finite<T>(n.grad))
            throw NumericError(std::string("backward: non-finite gradient at ") + n.op);
        n.backward(*this, Var{static_cast<std::uint32_t>(i)});
    }
}

template <typename T>
std::size_t Graph<T>::gradient_edge_count() const
{
    std::size_t edges = 0;
    for (const auto& n : nodes_) {
        if (!n.backward)
            continue;
        for (Var in : n.inputs)
            edges += nodes_[in.id].requires_grad ? 1 : 0;
    }
    return edges;
}

template class Graph<float>;
template class Graph<double>;

} // namespace vpclab::ad
