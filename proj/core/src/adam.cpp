#include "vpclab/adam.hpp"

#include <cmath>

namespace vpclab {

template <typename T>
AdamState<T> AdamState<T>::for_params(const ParamSet<T>& params, AdamHyper hyper)
{
    AdamState s;
    s.hyper = hyper;
    for (const auto& [name, t] : params)
        s.moments.emplace(name, AdamMoments<T>{std::vector<T>(t.size(), T(0)),
                                               std::vector<T>(t.size(), T(0))});
    return s;
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& moments,
                 std::uint64_t step, const AdamHyper& hyper, double lr)
{
    if (grad.size() != param.size() || moments.first.size() != param.size()
        || moments.second.size() != param.size())
        throw ShapeError("adam: gradient/moment size does not match parameter");
    if (step == 0)
        throw ContractError("adam: timestep is 1-based");
    const T b1 = static_cast<T>(hyper.beta1);
    const T b2 = static_cast<T>(hyper.beta2);
    const double t = static_cast<double>(step);
    const T corr1 = static_cast<T>(1.0 - std::pow(hyper.beta1, t));
    const T corr2 = static_cast<T>(1.0 - std::pow(hyper.beta2, t));
    const T eps = static_cast<T>(hyper.epsilon);
    const T rate = static_cast<T>(lr);
    T* m = moments.first.data();
    T* v = moments.second.data();
    T* p = param.data();
    const T* gp = grad.data();
    const std::size_t n = param.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
        const T g = gp[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        const T m_hat = m[i] / corr1;
        const T v_hat = v[i] / corr2;
        p[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
    }
}

template <typename T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state, double lr)
{
    for (const auto& [name, p] : params) {
        if (!grads.contains(name))
            throw ContractError("adam_step: missing gradient for '" + name + "'");
        if (grads.at(name).shape != p.shape)
            throw ShapeError("adam_step: gradient shape mismatch for '" + name + "'");
        if (!state.moments.count(name))
            throw ContractError("adam_step: no moments for '" + name + "'");
    }
    const std::uint64_t step = ++state.step;
    for (auto& [name, p] : params)
        adam_update<T>(p.data, grads.at(name).data, state.moments.at(name), step, state.hyper, lr);
    params.bump_version();
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_update<float>(std::span<float>, std::span<const float>, AdamMoments<float>&,
                                 std::uint64_t, const AdamHyper&, double);
template void adam_update<double>(std::span<double>, std::span<const double>,
                                  AdamMoments<double>&, std::uint64_t, const AdamHyper&, double);
template void adam_step<float>(ParamSet<float>&, const ParamSet<float>&, AdamState<float>&, double);
template void adam_step<double>(ParamSet<double>&, const ParamSet<double>&, AdamState<double>&,
                                double);

} // namespace vpclab
