#include "vpclab/tensor.hpp"

#include <cmath>
#include <limits>

namespace vpclab {

std::string shape_str(const Shape& shape)
{
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i)
            out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

template <typename T>
bool all_finite(std::span<const T> values)
{
    const T* p = values.data();
    const std::size_t n = values.size();
    const T max = std::numeric_limits<T>::max();
    int bad = 0;
#pragma omp simd reduction(| : bad)
    for (std::size_t i = 0; i < n; ++i)
        bad |= !(std::abs(p[i]) <= max); // NaN compares false
    return bad == 0;
}

template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);

} // namespace vpclab
