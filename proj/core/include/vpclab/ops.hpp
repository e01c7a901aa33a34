#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vpclab/graph.hpp"

namespace vpclab::ad {

// Differentiable operations. Every function records exactly one node on the
// graph (lstm_step records a small subgraph) and throws ShapeError when the
// operand shapes do not compose.

template <typename T> Var add(Graph<T>& g, Var a, Var b);
template <typename T> Var sub(Graph<T>& g, Var a, Var b);
template <typename T> Var mul(Graph<T>& g, Var a, Var b);
template <typename T> Var scale(Graph<T>& g, Var x, T factor);
template <typename T> Var add_scalar(Graph<T>& g, Var x, T offset);
template <typename T> Var square(Graph<T>& g, Var x);
template <typename T> Var abs(Graph<T>& g, Var x);

/// Elementwise sum of same-shaped operands.
template <typename T> Var add_n(Graph<T>& g, std::span<const Var> terms);

template <typename T> Var sum(Graph<T>& g, Var x);
template <typename T> Var mean(Graph<T>& g, Var x);
/// Scalar x[index].
template <typename T> Var pick(Graph<T>& g, Var x, std::size_t index);

template <typename T> Var sigmoid(Graph<T>& g, Var x);
template <typename T> Var tanh(Graph<T>& g, Var x);
/// ELU with alpha = 1.
template <typename T> Var elu(Graph<T>& g, Var x);
template <typename T> Var relu(Graph<T>& g, Var x);
template <typename T> Var softmax(Graph<T>& g, Var x);
template <typename T> Var log_softmax(Graph<T>& g, Var x);

/// Flattens and joins the operands into one vector.
template <typename T> Var concat(Graph<T>& g, std::span<const Var> parts);
template <typename T> Var slice(Graph<T>& g, Var x, std::size_t offset, std::size_t length);
template <typename T> Var reshape(Graph<T>& g, Var x, Shape shape);

/// Copy of x that no gradient flows back through.
template <typename T> Var stop_gradient(Graph<T>& g, Var x);

/// out = x^T W + b with x:[n], W:[n,m], b:[m].
template <typename T> Var linear(Graph<T>& g, Var x, Var weight, Var bias);

/// 2-D convolution over an HxWxC input with a kxkxCxO kernel and
/// zero "same" padding: output is ceil(H/stride) x ceil(W/stride) x O.
/// Padding splits like TensorFlow's SAME (extra row/column at the bottom/right).
template <typename T> Var conv2d(Graph<T>& g, Var x, Var weight, Var bias, std::size_t stride = 2);

struct LstmVars {
    Var h;
    Var c;
};

/// One LSTM cell step. weight: [(n+H), 4H] over concat(x, h) with gate blocks
/// ordered input, forget, candidate, output; bias: [4H].
template <typename T>
LstmVars lstm_step(Graph<T>& g, Var x, LstmVars state, Var weight, Var bias);

/// Output spatial size of conv2d along one axis.
constexpr std::size_t conv_out_size(std::size_t in, std::size_t stride)
{
    return (in + stride - 1) / stride;
}

} // namespace vpclab::ad
