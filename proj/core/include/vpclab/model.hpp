#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vpclab/ops.hpp"
#include "vpclab/params.hpp"

namespace vpclab::agent {

enum class Variant { A3C, PRED, ICM, VPC };

std::string_view variant_name(Variant v);
/// Case-insensitive. Throws FormatError for unknown names.
Variant parse_variant(std::string_view name);

/// Variants that carry the forward/inverse prediction model.
constexpr bool has_prediction(Variant v) { return v != Variant::A3C; }

enum class Extractor { Shared, IcmCopy };

struct ModelDims {
    std::size_t obs_rows = 10;
    std::size_t obs_cols = 30;
    std::size_t obs_channels = 3;
    std::size_t conv_layers = 4;
    std::size_t conv_filters = 32;
    std::size_t lstm_units = 256;
    std::size_t hidden = 256;
    std::size_t actions = 4;

    /// Flattened size of the last conv layer's output.
    std::size_t feature_dim() const;
};

template <typename T>
struct LstmState {
    std::vector<T> h;
    std::vector<T> c;

    static LstmState zeros(std::size_t units) { return {std::vector<T>(units), std::vector<T>(units)}; }
    friend bool operator==(const LstmState&, const LstmState&) = default;
};

/// Fresh parameters for a variant: fan-in scaled uniform weights, zero biases,
/// LSTM forget-gate bias 1, and a small-scale policy head so the initial
/// policy is close to uniform.
template <typename T>
ParamSet<T> init_params(Variant variant, const ModelDims& dims, std::uint64_t seed);

struct PolicyValueVars {
    ad::Var logits;
    ad::Var policy;
    ad::Var log_policy;
    ad::Var value;
    ad::LstmVars state;
};

/// The agent networks bound to one graph. Construction binds every parameter
/// as a graph leaf; methods record the network computations.
template <typename T>
class AgentNet {
public:
    AgentNet(Variant variant, const ModelDims& dims, ad::Graph<T>& graph, const ParamSet<T>& params);

    Variant variant() const { return variant_; }
    const ModelDims& dims() const { return dims_; }
    ad::Graph<T>& graph() { return graph_; }
    const ParamBinding& binding() const { return binding_; }

    /// Constant leaf holding an observation; checks its shape.
    ad::Var observation(const Tensor<float>& obs);
    ad::LstmVars state(const LstmState<T>& s);
    LstmState<T> state_values(ad::LstmVars s) const;

    /// Four stride-2 conv + ELU layers flattened to feature_dim().
    /// IcmCopy is only available for the ICM variant.
    ad::Var extract_features(ad::Var obs, Extractor which = Extractor::Shared);

    /// One LSTM step on the features followed by the policy and value heads.
    PolicyValueVars policy_value(ad::Var features, ad::LstmVars state);

    /// Predicted next-state features from (features, one-hot action).
    ad::Var forward_model(ad::Var features, int action);

    ad::Var inverse_logits(ad::Var features_t, ad::Var features_t1);
    /// Softmax of inverse_logits: estimated distribution of the action taken.
    ad::Var inverse_model(ad::Var features_t, ad::Var features_t1);

    /// Value of predicted features, with the LSTM started from `snapshot`
    /// (the state right after policy_value on the current features). Nothing
    /// in this computation requires a gradient and the caller's LSTM
    /// variables are only read. VPC only.
    ad::Var predicted_value(ad::Var predicted_features, ad::LstmVars snapshot);

private:
    void require_prediction(const char* op) const;

    Variant variant_;
    ModelDims dims_;
    ad::Graph<T>& graph_;
    ParamBinding binding_;
};

extern template class AgentNet<float>;
extern template class AgentNet<double>;

} // namespace vpclab::agent
