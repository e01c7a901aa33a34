#include "vpclab/params.hpp"

#include <cmath>

namespace vpclab {

template <typename T>
void ParamSet<T>::add(const std::string& name, Tensor<T> value)
{
    if (!tensors_.emplace(name, std::move(value)).second)
        throw ContractError("params: duplicate parameter '" + name + "'");
}

template <typename T>
Tensor<T>& ParamSet<T>::at(const std::string& name)
{
    auto it = tensors_.find(name);
    if (it == tensors_.end())
        throw ContractError("params: no parameter '" + name + "'");
    return it->second;
}

template <typename T>
const Tensor<T>& ParamSet<T>::at(const std::string& name) const
{
    auto it = tensors_.find(name);
    if (it == tensors_.end())
        throw ContractError("params: no parameter '" + name + "'");
    return it->second;
}

template <typename T>
std::vector<std::string> ParamSet<T>::names() const
{
    std::vector<std::string> out;
    out.reserve(tensors_.size());
    for (const auto& kv : tensors_)
        out.push_back(kv.first);
    return out;
}

template <typename T>
std::size_t ParamSet<T>::total_elements() const
{
    std::size_t n = 0;
    for (const auto& kv : tensors_)
        n += kv.second.size();
    return n;
}

template <typename T>
ParamSet<T> ParamSet<T>::zeros_like() const
{
    ParamSet out;
    for (const auto& [name, t] : tensors_)
        out.add(name, Tensor<T>(t.shape));
    return out;
}

ad::Var ParamBinding::operator[](const std::string& name) const
{
    auto it = vars.find(name);
    if (it == vars.end())
        throw ContractError("binding: no parameter '" + name + "'");
    return it->second;
}

template <typename T>
ParamBinding bind(ad::Graph<T>& graph, const ParamSet<T>& params)
{
    ParamBinding b;
    for (const auto& [name, t] : params) {
        Tensor<T> copy(t.shape, t.data);
        b.vars.emplace(name, graph.leaf(std::move(copy), true));
    }
    return b;
}

template <typename T>
ParamSet<T> gradients(const ad::Graph<T>& graph, const ParamBinding& binding,
                      const ParamSet<T>& params)
{
    ParamSet<T> out;
    for (const auto& [name, t] : params) {
        Tensor<T> g(t.shape);
        auto src = graph.grad(binding[name]);
        if (!src.empty())
            std::copy(src.begin(), src.end(), g.data.begin());
        out.add(name, std::move(g));
    }
    return out;
}

template <typename T>
double global_norm(const ParamSet<T>& grads)
{
    double sq = 0.0;
    for (const auto& kv : grads) {
        const T* p = kv.second.data.data();
        const std::size_t n = kv.second.data.size();
        double part = 0.0;
#pragma omp simd reduction(+ : part)
        for (std::size_t i = 0; i < n; ++i)
            part += static_cast<double>(p[i]) * static_cast<double>(p[i]);
        sq += part;
    }
    return std::sqrt(sq);
}

template <typename T>
double clip_global_norm(ParamSet<T>& grads, double max_norm)
{
    if (!(max_norm > 0.0))
        throw ContractError("clip_global_norm: max_norm must be positive");
    const double norm = global_norm(grads);
    if (norm > max_norm) {
        const T factor = static_cast<T>(max_norm / norm);
        for (auto& kv : grads)
            for (T& v : kv.second.data)
                v *= factor;
    }
    return norm;
}

template class ParamSet<float>;
template class ParamSet<double>;
template ParamBinding bind<float>(ad::Graph<float>&, const ParamSet<float>&);
template ParamBinding bind<double>(ad::Graph<double>&, const ParamSet<double>&);
template ParamSet<float> gradients<float>(const ad::Graph<float>&, const ParamBinding&,
                                          const ParamSet<float>&);
template ParamSet<double> gradients<double>(const ad::Graph<double>&, const ParamBinding&,
                                            const ParamSet<double>&);
template double global_norm<float>(const ParamSet<float>&);
template double global_norm<double>(const ParamSet<double>&);
template double clip_global_norm<float>(ParamSet<float>&, double);
template double clip_global_norm<double>(ParamSet<double>&, double);

} // namespace vpclab
