#include "vpclab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vpclab::ad {

namespace {

template <typename T>
void require_same_size(const Graph<T>& g, Var a, Var b, const char* op)
{
    if (g.shape(a) != g.shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(g.shape(a)) + " vs "
                         + shape_str(g.shape(b)));
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n)
{
    T s = T(0);
#pragma omp simd reduction(+ : s)
    for (std::size_t i = 0; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n)
{
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

// Unary elementwise op whose derivative is a function of (input, output).
template <typename T, typename Fwd, typename Deriv>
Var unary(Graph<T>& g, Var x, const char* op, Fwd fwd, Deriv deriv)
{
    const auto& in = g.value(x);
    Tensor<T> out(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i)
        out[i] = fwd(in[i]);
    return g.record(op, std::move(out), {x}, [x, deriv](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        auto xv = gr.values(x);
        auto yv = gr.values(self);
        auto gx = gr.grad_accum(x);
        for (std::size_t i = 0; i < gx.size(); ++i)
            gx[i] += go[i] * deriv(xv[i], yv[i]);
    });
}

} // namespace

template <typename T>
Var add(Graph<T>& g, Var a, Var b)
{
    require_same_size(g, a, b, "add");
    Tensor<T> out = g.value(a);
    out.grad.reset();
    auto bv = g.values(b);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += bv[i];
    return g.record("add", std::move(out), {a, b}, [a, b](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        for (Var in : {a, b}) {
            if (!gr.requires_grad(in))
                continue;
            auto gi = gr.grad_accum(in);
            for (std::size_t i = 0; i < gi.size(); ++i)
                gi[i] += go[i];
        }
    });
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b)
{
    require_same_size(g, a, b, "sub");
    Tensor<T> out = g.value(a);
    out.grad.reset();
    auto bv = g.values(b);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] -= bv[i];
    return g.record("sub", std::move(out), {a, b}, [a, b](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        if (gr.requires_grad(a)) {
            auto ga = gr.grad_accum(a);
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga[i] += go[i];
        }
        if (gr.requires_grad(b)) {
            auto gb = gr.grad_accum(b);
            for (std::size_t i = 0; i < gb.size(); ++i)
                gb[i] -= go[i];
        }
    });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b)
{
    require_same_size(g, a, b, "mul");
    Tensor<T> out = g.value(a);
    out.grad.reset();
    auto bv = g.values(b);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] *= bv[i];
    return g.record("mul", std::move(out), {a, b}, [a, b](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        auto av = gr.values(a);
        auto bv = gr.values(b);
        if (gr.requires_grad(a)) {
            auto ga = gr.grad_accum(a);
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga[i] += go[i] * bv[i];
        }
        if (gr.requires_grad(b)) {
            auto gb = gr.grad_accum(b);
            for (std::size_t i = 0; i < gb.size(); ++i)
                gb[i] += go[i] * av[i];
        }
    });
}

template <typename T>
Var scale(Graph<T>& g, Var x, T factor)
{
    return unary(
        g, x, "scale", [factor](T v) { return factor * v; }, [factor](T, T) { return factor; });
}

template <typename T>
Var add_scalar(Graph<T>& g, Var x, T offset)
{
    return unary(
        g, x, "add_scalar", [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Var square(Graph<T>& g, Var x)
{
    return unary(
        g, x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var abs(Graph<T>& g, Var x)
{
    return unary(
        g, x, "abs", [](T v) { return std::abs(v); },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var add_n(Graph<T>& g, std::span<const Var> terms)
{
    if (terms.empty())
        throw ShapeError("add_n: no operands");
    Tensor<T> out(g.shape(terms[0]));
    for (Var t : terms) {
        require_same_size(g, terms[0], t, "add_n");
        auto tv = g.values(t);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += tv[i];
    }
    std::vector<Var> inputs(terms.begin(), terms.end());
    return g.record("add_n", std::move(out), inputs, [inputs](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        for (Var in : inputs) {
            if (!gr.requires_grad(in))
                continue;
            auto gi = gr.grad_accum(in);
            for (std::size_t i = 0; i < gi.size(); ++i)
                gi[i] += go[i];
        }
    });
}

template <typename T>
Var sum(Graph<T>& g, Var x)
{
    T s = T(0);
    for (T v : g.values(x))
        s += v;
    return g.record("sum", Tensor<T>::scalar(s), {x}, [x](Graph<T>& gr, Var self) {
        T go = gr.grad(self)[0];
        for (T& v : gr.grad_accum(x))
            v += go;
    });
}

template <typename T>
Var mean(Graph<T>& g, Var x)
{
    const auto n = static_cast<T>(g.value(x).size());
    T s = T(0);
    for (T v : g.values(x))
        s += v;
    return g.record("mean", Tensor<T>::scalar(s / n), {x}, [x, n](Graph<T>& gr, Var self) {
        T go = gr.grad(self)[0] / n;
        for (T& v : gr.grad_accum(x))
            v += go;
    });
}

template <typename T>
Var pick(Graph<T>& g, Var x, std::size_t index)
{
    if (index >= g.value(x).size())
        throw ShapeError("pick: index " + std::to_string(index) + " out of range for "
                         + shape_str(g.shape(x)));
    return g.record("pick", Tensor<T>::scalar(g.values(x)[index]), {x},
                    [x, index](Graph<T>& gr, Var self) {
                        gr.grad_accum(x)[index] += gr.grad(self)[0];
                    });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var x)
{
    return unary(
        g, x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var tanh(Graph<T>& g, Var x)
{
    return unary(
        g, x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var elu(Graph<T>& g, Var x)
{
    return unary(
        g, x, "elu", [](T v) { return v > T(0) ? v : std::expm1(v); },
        [](T v, T y) { return v > T(0) ? T(1) : y + T(1); });
}

template <typename T>
Var relu(Graph<T>& g, Var x)
{
    return unary(
        g, x, "relu", [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var softmax(Graph<T>& g, Var x)
{
    const auto& in = g.value(x);
    if (in.rank() != 1 || in.size() == 0)
        throw ShapeError("softmax: expected a non-empty vector, got " + shape_str(in.shape));
    Tensor<T> out(in.shape);
    const T mx = *std::max_element(in.data.begin(), in.data.end());
    T z = T(0);
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = std::exp(in[i] - mx);
        z += out[i];
    }
    for (T& v : out.data)
        v /= z;
    return g.record("softmax", std::move(out), {x}, [x](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        auto y = gr.values(self);
        T inner = T(0);
        for (std::size_t i = 0; i < y.size(); ++i)
            inner += go[i] * y[i];
        auto gx = gr.grad_accum(x);
        for (std::size_t i = 0; i < y.size(); ++i)
            gx[i] += y[i] * (go[i] - inner);
    });
}

template <typename T>
Var log_softmax(Graph<T>& g, Var x)
{
    const auto& in = g.value(x);
    if (in.rank() != 1 || in.size() == 0)
        throw ShapeError("log_softmax: expected a non-empty vector, got " + shape_str(in.shape));
    const T mx = *std::max_element(in.data.begin(), in.data.end());
    T z = T(0);
    for (T v : in.data)
        z += std::exp(v - mx);
    const T lse = mx + std::log(z);
    Tensor<T> out(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i)
        out[i] = in[i] - lse;
    return g.record("log_softmax", std::move(out), {x}, [x](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        auto y = gr.values(self);
        T total = T(0);
        for (T v : go)
            total += v;
        auto gx = gr.grad_accum(x);
        for (std::size_t i = 0; i < y.size(); ++i)
            gx[i] += go[i] - std::exp(y[i]) * total;
    });
}

template <typename T>
Var concat(Graph<T>& g, std::span<const Var> parts)
{
    std::size_t total = 0;
    for (Var p : parts)
        total += g.value(p).size();
    Tensor<T> out({total});
    std::size_t off = 0;
    for (Var p : parts) {
        auto pv = g.values(p);
        std::copy(pv.begin(), pv.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += pv.size();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return g.record("concat", std::move(out), inputs, [inputs](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        std::size_t offset = 0;
        for (Var in : inputs) {
            const std::size_t n = gr.value(in).size();
            if (gr.requires_grad(in)) {
                auto gi = gr.grad_accum(in);
                for (std::size_t i = 0; i < n; ++i)
                    gi[i] += go[offset + i];
            }
            offset += n;
        }
    });
}

template <typename T>
Var slice(Graph<T>& g, Var x, std::size_t offset, std::size_t length)
{
    auto xv = g.values(x);
    if (offset + length > xv.size())
        throw ShapeError("slice: [" + std::to_string(offset) + ", " + std::to_string(offset + length)
                         + ") exceeds " + shape_str(g.shape(x)));
    Tensor<T> out({length}, std::vector<T>(xv.begin() + static_cast<std::ptrdiff_t>(offset),
                                           xv.begin() + static_cast<std::ptrdiff_t>(offset + length)));
    return g.record("slice", std::move(out), {x}, [x, offset](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        auto gx = gr.grad_accum(x);
        for (std::size_t i = 0; i < go.size(); ++i)
            gx[offset + i] += go[i];
    });
}

template <typename T>
Var reshape(Graph<T>& g, Var x, Shape shape)
{
    const auto& in = g.value(x);
    if (numel(shape) != in.size())
        throw ShapeError("reshape: cannot view " + shape_str(in.shape) + " as " + shape_str(shape));
    Tensor<T> out(std::move(shape), in.data);
    return g.record("reshape", std::move(out), {x}, [x](Graph<T>& gr, Var self) {
        auto go = gr.grad(self);
        auto gx = gr.grad_accum(x);
        for (std::size_t i = 0; i < go.size(); ++i)
            gx[i] += go[i];
    });
}

template <typename T>
Var stop_gradient(Graph<T>& g, Var x)
{
    Tensor<T> copy = g.value(x);
    copy.grad.reset();
    return g.constant(std::move(copy));
}

template <typename T>
Var linear(Graph<T>& g, Var x, Var weight, Var bias)
{
    const auto& xs = g.shape(x);
    const auto& ws = g.shape(weight);
    const auto& bs = g.shape(bias);
    if (xs.size() != 1 || ws.size() != 2 || bs.size() != 1 || ws[0] != xs[0] || ws[1] != bs[0])
        throw ShapeError("linear: incompatible shapes x" + shape_str(xs) + " W" + shape_str(ws)
                         + " b" + shape_str(bs));
    const std::size_t n = ws[0];
    const std::size_t m = ws[1];
    Tensor<T> out({m}, std::vector<T>(g.values(bias).begin(), g.values(bias).end()));
    const T* xp = g.values(x).data();
    const T* wp = g.values(weight).data();
    for (std::size_t i = 0; i < n; ++i)
        axpy(xp[i], wp + i * m, out.data.data(), m);

    return g.record("linear", std::move(out), {x, weight, bias},
                    [x, weight, bias, n, m](Graph<T>& gr, Var self) {
                        const T* go = gr.grad(self).data();
                        const T* xv = gr.values(x).data();
                        const T* wv = gr.values(weight).data();
                        if (gr.requires_grad(weight)) {
                            T* gw = gr.grad_accum(weight).data();
                            for (std::size_t i = 0; i < n; ++i)
                                axpy(xv[i], go, gw + i * m, m);
                        }
                        if (gr.requires_grad(x)) {
                            T* gx = gr.grad_accum(x).data();
                            for (std::size_t i = 0; i < n; ++i)
                                gx[i] += dot(wv + i * m, go, m);
                        }
                        if (gr.requires_grad(bias)) {
                            T* gb = gr.grad_accum(bias).data();
                            for (std::size_t j = 0; j < m; ++j)
                                gb[j] += go[j];
                        }
                    });
}

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var weight, Var bias, std::size_t stride)
{
    const auto& xs = g.shape(x);
    const auto& ws = g.shape(weight);
    const auto& bs = g.shape(bias);
    if (xs.size() != 3 || ws.size() != 4 || bs.size() != 1)
        throw ShapeError("conv2d: expected HxWxC input, kxkxCxO kernel and O bias, got "
                         + shape_str(xs) + " " + shape_str(ws) + " " + shape_str(bs));
    if (ws[0] != ws[1])
        throw ShapeError("conv2d: kernel must be square, got " + shape_str(ws));
    if (ws[2] != xs[2])
        throw ShapeError("conv2d: input has " + std::to_string(xs[2]) + " channels, kernel expects "
                         + std::to_string(ws[2]));
    if (ws[3] != bs[0])
        throw ShapeError("conv2d: bias length " + std::to_string(bs[0]) + " != filters "
                         + std::to_string(ws[3]));
    if (stride == 0)
        throw ContractError("conv2d: stride must be positive");

    const std::size_t in_h = xs[0], in_w = xs[1], cin = xs[2];
    const std::size_t k = ws[0], cout = ws[3];
    const std::size_t out_h = conv_out_size(in_h, stride);
    const std::size_t out_w = conv_out_size(in_w, stride);
    const auto pad_total = [&](std::size_t in, std::size_t out) {
        const std::size_t need = (out - 1) * stride + k;
        return need > in ? need - in : std::size_t{0};
    };
    const std::ptrdiff_t pad_top = static_cast<std::ptrdiff_t>(pad_total(in_h, out_h) / 2);
    const std::ptrdiff_t pad_left = static_cast<std::ptrdiff_t>(pad_total(in_w, out_w) / 2);

    // Visits every (output cell, kernel tap) pair that lands inside the input.
    auto for_each_tap = [=](auto&& fn) {
        for (std::size_t oy = 0; oy < out_h; ++oy)
            for (std::size_t ox = 0; ox < out_w; ++ox)
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad_top;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h))
                        continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t ix
                            = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad_left;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w))
                            continue;
                        fn((oy * out_w + ox) * cout,
                           (static_cast<std::size_t>(iy) * in_w + static_cast<std::size_t>(ix)) * cin,
                           (ky * k + kx) * cin * cout);
                    }
                }
    };

    Tensor<T> out({out_h, out_w, cout});
    const T* bv = g.values(bias).data();
    for (std::size_t p = 0; p < out_h * out_w; ++p)
        std::copy(bv, bv + cout, out.data.data() + p * cout);
    const T* xv = g.values(x).data();
    const T* wv = g.values(weight).data();
    T* ov = out.data.data();
    for_each_tap([&](std::size_t o_off, std::size_t x_off, std::size_t w_off) {
        for (std::size_t ci = 0; ci < cin; ++ci)
            axpy(xv[x_off + ci], wv + w_off + ci * cout, ov + o_off, cout);
    });

    return g.record("conv2d", std::move(out), {x, weight, bias},
                    [=](Graph<T>& gr, Var self) {
                        const T* go = gr.grad(self).data();
                        const T* xin = gr.values(x).data();
                        const T* win = gr.values(weight).data();
                        T* gw = gr.requires_grad(weight) ? gr.grad_accum(weight).data() : nullptr;
                        T* gx = gr.requires_grad(x) ? gr.grad_accum(x).data() : nullptr;
                        for_each_tap([&](std::size_t o_off, std::size_t x_off, std::size_t w_off) {
                            for (std::size_t ci = 0; ci < cin; ++ci) {
                                if (gw)
                                    axpy(xin[x_off + ci], go + o_off, gw + w_off + ci * cout, cout);
                                if (gx)
                                    gx[x_off + ci] += dot(win + w_off + ci * cout, go + o_off, cout);
                            }
                        });
                        if (gr.requires_grad(bias)) {
                            T* gb = gr.grad_accum(bias).data();
                            for (std::size_t p = 0; p < out_h * out_w; ++p)
                                for (std::size_t o = 0; o < cout; ++o)
                                    gb[o] += go[p * cout + o];
                        }
                    });
}

template <typename T>
LstmVars lstm_step(Graph<T>& g, Var x, LstmVars state, Var weight, Var bias)
{
    const std::size_t hidden = g.value(state.h).size();
    if (g.value(state.c).size() != hidden)
        throw ShapeError("lstm_step: h and c sizes differ");
    if (g.shape(bias) != Shape{4 * hidden})
        throw ShapeError("lstm_step: bias " + shape_str(g.shape(bias)) + " does not match "
                         + std::to_string(hidden) + " units");
    const Var parts[] = {x, state.h};
    const Var z = linear(g, concat<T>(g, parts), weight, bias);
    const Var in_gate = sigmoid(g, slice(g, z, 0, hidden));
    const Var forget_gate = sigmoid(g, slice(g, z, hidden, hidden));
    const Var candidate = tanh(g, slice(g, z, 2 * hidden, hidden));
    const Var out_gate = sigmoid(g, slice(g, z, 3 * hidden, hidden));
    const Var c_next = add(g, mul(g, forget_gate, state.c), mul(g, in_gate, candidate));
    const Var h_next = mul(g, out_gate, tanh(g, c_next));
    return {h_next, c_next};
}

#define VPCLAB_INSTANTIATE_OPS(T)                                                               \
    template Var add<T>(Graph<T>&, Var, Var);                                                   \
    template Var sub<T>(Graph<T>&, Var, Var);                                                   \
    template Var mul<T>(Graph<T>&, Var, Var);                                                   \
    template Var scale<T>(Graph<T>&, Var, T);                                                   \
    template Var add_scalar<T>(Graph<T>&, Var, T);                                              \
    template Var square<T>(Graph<T>&, Var);                                                     \
    template Var abs<T>(Graph<T>&, Var);                                                        \
    template Var add_n<T>(Graph<T>&, std::span<const Var>);                                     \
    template Var sum<T>(Graph<T>&, Var);                                                        \
    template Var mean<T>(Graph<T>&, Var);                                                       \
    template Var pick<T>(Graph<T>&, Var, std::size_t);                                          \
    template Var sigmoid<T>(Graph<T>&, Var);                                                    \
    template Var tanh<T>(Graph<T>&, Var);                                                       \
    template Var elu<T>(Graph<T>&, Var);                                                        \
    template Var relu<T>(Graph<T>&, Var);                                                       \
    template Var softmax<T>(Graph<T>&, Var);                                                    \
    template Var log_softmax<T>(Graph<T>&, Var);                                                \
    template Var concat<T>(Graph<T>&, std::span<const Var>);                                    \
    template Var slice<T>(Graph<T>&, Var, std::size_t, std::size_t);                            \
    template Var reshape<T>(Graph<T>&, Var, Shape);                                             \
    template Var stop_gradient<T>(Graph<T>&, Var);                                              \
    template Var linear<T>(Graph<T>&, Var, Var, Var);                                           \
    template Var conv2d<T>(Graph<T>&, Var, Var, Var, std::size_t);                              \
    template LstmVars lstm_step<T>(Graph<T>&, Var, LstmVars, Var, Var);

VPCLAB_INSTANTIATE_OPS(float)
VPCLAB_INSTANTIATE_OPS(double)

} // namespace vpclab::ad
