#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpclab/errors.hpp"

namespace vpclab {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_str(const Shape& shape);

/// Dense row-major array. `grad`, when set, always matches `data` in length.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;
    std::optional<std::vector<T>> grad;

    Tensor() = default;

    explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), T(0)) {}

    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values))
    {
        if (numel(shape) != data.size())
            throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold "
                             + std::to_string(data.size()) + " values");
    }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    std::span<T> span() { return data; }
    std::span<const T> span() const { return data; }

    void zero_grad() { grad.emplace(data.size(), T(0)); }
};

template <typename T>
bool all_finite(std::span<const T> values);

} // namespace vpclab
