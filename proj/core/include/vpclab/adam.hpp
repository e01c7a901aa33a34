#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vpclab/params.hpp"

namespace vpclab {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamMoments {
    std::vector<T> first;
    std::vector<T> second;
};

/// Moment estimates for every tensor of a ParamSet plus the shared timestep.
template <typename T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::map<std::string, AdamMoments<T>> moments;

    static AdamState for_params(const ParamSet<T>& params, AdamHyper hyper = {});
};

/// Bias-corrected Adam update of one tensor at timestep `step` (1-based).
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& moments,
                 std::uint64_t step, const AdamHyper& hyper, double lr);

/// Applies one Adam step to every parameter and advances state.step by one.
/// Every parameter must have a gradient of matching shape.
template <typename T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state, double lr);

} // namespace vpclab
