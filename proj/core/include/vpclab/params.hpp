#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vpclab/graph.hpp"

namespace vpclab {

/// Named parameter tensors. Iteration order is the sorted name order, which
/// fixes the checkpoint layout and every per-parameter loop.
template <typename T>
class ParamSet {
public:
    using Map = std::map<std::string, Tensor<T>>;

    /// Throws ContractError on a duplicate name.
    void add(const std::string& name, Tensor<T> value);

    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    Tensor<T>& at(const std::string& name);
    const Tensor<T>& at(const std::string& name) const;

    std::vector<std::string> names() const;
    std::size_t size() const { return tensors_.size(); }
    std::size_t total_elements() const;

    std::uint64_t version() const { return version_; }
    void set_version(std::uint64_t v) { version_ = v; }
    void bump_version() { ++version_; }

    auto begin() { return tensors_.begin(); }
    auto end() { return tensors_.end(); }
    auto begin() const { return tensors_.begin(); }
    auto end() const { return tensors_.end(); }

    /// Same names and shapes, all zeros, version 0.
    ParamSet zeros_like() const;

    template <typename U>
    ParamSet<U> cast() const
    {
        ParamSet<U> out;
        for (const auto& [name, t] : tensors_)
            out.add(name, Tensor<U>(t.shape, std::vector<U>(t.data.begin(), t.data.end())));
        out.set_version(version_);
        return out;
    }

private:
    Map tensors_;
    std::uint64_t version_ = 0;
};

/// Graph leaves for every parameter of a ParamSet.
struct ParamBinding {
    std::map<std::string, ad::Var> vars;

    ad::Var operator[](const std::string& name) const;
    bool contains(const std::string& name) const { return vars.count(name) != 0; }
};

template <typename T>
ParamBinding bind(ad::Graph<T>& graph, const ParamSet<T>& params);

/// Gradients of the last backward pass, one tensor per bound parameter.
/// Parameters the loss does not reach get an all-zero gradient.
template <typename T>
ParamSet<T> gradients(const ad::Graph<T>& graph, const ParamBinding& binding,
                      const ParamSet<T>& params);

/// Global L2 norm over every tensor in the set.
template <typename T>
double global_norm(const ParamSet<T>& grads);

/// Rescales all gradients by max_norm / norm when the global norm exceeds
/// max_norm. Returns the norm before clipping.
template <typename T>
double clip_global_norm(ParamSet<T>& grads, double max_norm);

extern template class ParamSet<float>;
extern template class ParamSet<double>;

} // namespace vpclab
