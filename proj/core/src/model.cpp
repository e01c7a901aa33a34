#include "vpclab/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace vpclab::agent {

using ad::Var;

std::string_view variant_name(Variant v)
{
    switch (v) {
    case Variant::A3C: return "a3c";
    case Variant::PRED: return "pred";
    case Variant::ICM: return "icm";
    case Variant::VPC: return "vpc";
    }
    return "?";
}

Variant parse_variant(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (Variant v : {Variant::A3C, Variant::PRED, Variant::ICM, Variant::VPC})
        if (variant_name(v) == lower)
            return v;
    throw FormatError("unknown agent variant '" + std::string(name) + "'");
}

std::size_t ModelDims::feature_dim() const
{
    std::size_t h = obs_rows, w = obs_cols;
    for (std::size_t i = 0; i < conv_layers; ++i) {
        h = ad::conv_out_size(h, 2);
        w = ad::conv_out_size(w, 2);
    }
    return h * w * conv_filters;
}

namespace {

class UniformInit {
public:
    explicit UniformInit(std::uint64_t seed) : rng_(seed) {}

    template <typename T>
    Tensor<T> tensor(Shape shape, double bound)
    {
        Tensor<T> t(std::move(shape));
        for (T& v : t.data) {
            const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
            v = static_cast<T>(bound * (2.0 * u - 1.0));
        }
        return t;
    }

private:
    std::mt19937_64 rng_;
};

template <typename T>
void add_extractor(ParamSet<T>& p, UniformInit& init, const std::string& prefix, const ModelDims& d)
{
    std::size_t channels = d.obs_channels;
    for (std::size_t i = 1; i <= d.conv_layers; ++i) {
        const std::string base = prefix + ".conv" + std::to_string(i);
        // Variance-preserving gain for the rectifier-like ELU stack; a plain
        // 1/sqrt(fan_in) bound shrinks activations ~3x per layer and leaves
        // the 64 features (and the curiosity signal built on them) tiny.
        const double fan_in = 9.0 * static_cast<double>(channels);
        p.add(base + ".weight", init.tensor<T>({3, 3, channels, d.conv_filters}, std::sqrt(6.0 / fan_in)));
        p.add(base + ".bias", Tensor<T>({d.conv_filters}));
        channels = d.conv_filters;
    }
}

template <typename T>
void add_linear(ParamSet<T>& p, UniformInit& init, const std::string& base, std::size_t in,
                std::size_t out, double bound)
{
    p.add(base + ".weight", init.tensor<T>({in, out}, bound));
    p.add(base + ".bias", Tensor<T>({out}));
}

double fan_in_bound(std::size_t fan_in)
{
    return 1.0 / std::sqrt(static_cast<double>(fan_in));
}

} // namespace

template <typename T>
ParamSet<T> init_params(Variant variant, const ModelDims& d, std::uint64_t seed)
{
    UniformInit init(seed);
    ParamSet<T> p;
    const std::size_t feat = d.feature_dim();
    add_extractor(p, init, "fe", d);

    const std::size_t lstm_in = feat + d.lstm_units;
    add_linear(p, init, "lstm", lstm_in, 4 * d.lstm_units, fan_in_bound(lstm_in));
    auto& lstm_bias = p.at("lstm.bias");
    std::fill(lstm_bias.data.begin() + static_cast<std::ptrdiff_t>(d.lstm_units),
              lstm_bias.data.begin() + static_cast<std::ptrdiff_t>(2 * d.lstm_units), T(1));

    add_linear(p, init, "policy", d.lstm_units, d.actions, 0.01 * fan_in_bound(d.lstm_units));
    add_linear(p, init, "value", d.lstm_units, 1, fan_in_bound(d.lstm_units));

    if (has_prediction(variant)) {
        add_linear(p, init, "forward.fc1", feat + d.actions, d.hidden, fan_in_bound(feat + d.actions));
        add_linear(p, init, "forward.fc2", d.hidden, feat, fan_in_bound(d.hidden));
        add_linear(p, init, "inverse.fc1", 2 * feat, d.hidden, fan_in_bound(2 * feat));
        add_linear(p, init, "inverse.fc2", d.hidden, d.actions, fan_in_bound(d.hidden));
    }
    if (variant == Variant::ICM)
        add_extractor(p, init, "fe_icm", d);
    return p;
}

template <typename T>
AgentNet<T>::AgentNet(Variant variant, const ModelDims& dims, ad::Graph<T>& graph,
                      const ParamSet<T>& params)
    : variant_(variant), dims_(dims), graph_(graph), binding_(bind(graph, params))
{
}

template <typename T>
Var AgentNet<T>::observation(const Tensor<float>& obs)
{
    const Shape expected{dims_.obs_rows, dims_.obs_cols, dims_.obs_channels};
    if (obs.shape != expected)
        throw ShapeError("observation shape " + shape_str(obs.shape) + ", expected "
                         + shape_str(expected));
    return graph_.constant(Tensor<T>(obs.shape, std::vector<T>(obs.data.begin(), obs.data.end())));
}

template <typename T>
ad::LstmVars AgentNet<T>::state(const LstmState<T>& s)
{
    if (s.h.size() != dims_.lstm_units || s.c.size() != dims_.lstm_units)
        throw ShapeError("lstm state must have " + std::to_string(dims_.lstm_units) + " units");
    return {graph_.constant(Tensor<T>({dims_.lstm_units}, s.h)),
            graph_.constant(Tensor<T>({dims_.lstm_units}, s.c))};
}

template <typename T>
LstmState<T> AgentNet<T>::state_values(ad::LstmVars s) const
{
    auto h = graph_.values(s.h);
    auto c = graph_.values(s.c);
    return {std::vector<T>(h.begin(), h.end()), std::vector<T>(c.begin(), c.end())};
}

template <typename T>
Var AgentNet<T>::extract_features(Var obs, Extractor which)
{
    if (which == Extractor::IcmCopy && variant_ != Variant::ICM)
        throw ContractError("extract_features: the ICM extractor copy only exists for the ICM variant");
    const std::string prefix = which == Extractor::Shared ? "fe" : "fe_icm";
    Var x = obs;
    for (std::size_t i = 1; i <= dims_.conv_layers; ++i) {
        const std::string base = prefix + ".conv" + std::to_string(i);
        x = ad::elu(graph_, ad::conv2d(graph_, x, binding_[base + ".weight"], binding_[base + ".bias"], 2));
    }
    return ad::reshape(graph_, x, {graph_.value(x).size()});
}

template <typename T>
PolicyValueVars AgentNet<T>::policy_value(Var features, ad::LstmVars state)
{
    PolicyValueVars out;
    out.state = ad::lstm_step(graph_, features, state, binding_["lstm.weight"], binding_["lstm.bias"]);
    out.logits = ad::linear(graph_, out.state.h, binding_["policy.weight"], binding_["policy.bias"]);
    out.policy = ad::softmax(graph_, out.logits);
    out.log_policy = ad::log_softmax(graph_, out.logits);
    out.value = ad::linear(graph_, out.state.h, binding_["value.weight"], binding_["value.bias"]);
    return out;
}

template <typename T>
void AgentNet<T>::require_prediction(const char* op) const
{
    if (!has_prediction(variant_))
        throw ContractError(std::string(op) + ": the " + std::string(variant_name(variant_))
                            + " variant has no prediction model");
}

template <typename T>
Var AgentNet<T>::forward_model(Var features, int action)
{
    require_prediction("forward_model");
    if (action < 0 || static_cast<std::size_t>(action) >= dims_.actions)
        throw ContractError("forward_model: action out of range");
    Tensor<T> one_hot({dims_.actions});
    one_hot[static_cast<std::size_t>(action)] = T(1);
    const Var parts[] = {features, graph_.constant(std::move(one_hot))};
    const Var in = ad::concat<T>(graph_, parts);
    const Var hidden = ad::relu(
        graph_, ad::linear(graph_, in, binding_["forward.fc1.weight"], binding_["forward.fc1.bias"]));
    return ad::linear(graph_, hidden, binding_["forward.fc2.weight"], binding_["forward.fc2.bias"]);
}

template <typename T>
Var AgentNet<T>::inverse_logits(Var features_t, Var features_t1)
{
    require_prediction("inverse_model");
    const Var parts[] = {features_t, features_t1};
    const Var in = ad::concat<T>(graph_, parts);
    const Var hidden = ad::relu(
        graph_, ad::linear(graph_, in, binding_["inverse.fc1.weight"], binding_["inverse.fc1.bias"]));
    return ad::linear(graph_, hidden, binding_["inverse.fc2.weight"], binding_["inverse.fc2.bias"]);
}

template <typename T>
Var AgentNet<T>::inverse_model(Var features_t, Var features_t1)
{
    return ad::softmax(graph_, inverse_logits(features_t, features_t1));
}

template <typename T>
Var AgentNet<T>::predicted_value(Var predicted_features, ad::LstmVars snapshot)
{
    if (variant_ != Variant::VPC)
        throw ContractError("predicted_value: only the VPC variant predicts values");
    auto guard = graph_.no_grad();
    const ad::LstmVars start{ad::stop_gradient(graph_, snapshot.h), ad::stop_gradient(graph_, snapshot.c)};
    const ad::LstmVars next = ad::lstm_step(graph_, ad::stop_gradient(graph_, predicted_features), start,
                                            binding_["lstm.weight"], binding_["lstm.bias"]);
    return ad::linear(graph_, next.h, binding_["value.weight"], binding_["value.bias"]);
}

template class AgentNet<float>;
template class AgentNet<double>;
template ParamSet<float> init_params<float>(Variant, const ModelDims&, std::uint64_t);
template ParamSet<double> init_params<double>(Variant, const ModelDims&, std::uint64_t);

} // namespace vpclab::agent
