#include "vpclab/losses.hpp"

#include <cmath>
#include <string>

namespace vpclab::loss {

using ad::Var;

std::string_view vpc_mode_name(VpcMode m)
{
    switch (m) {
    case VpcMode::Squared: return "squared";
    case VpcMode::Abs: return "abs";
    case VpcMode::Signed: return "signed";
    }
    return "?";
}

VpcMode parse_vpc_mode(std::string_view name)
{
    for (VpcMode m : {VpcMode::Squared, VpcMode::Abs, VpcMode::Signed})
        if (vpc_mode_name(m) == name)
            return m;
    throw FormatError("unknown vpc_mode '" + std::string(name) + "'");
}

template <typename T>
double intrinsic_reward(std::span<const T> predicted, std::span<const T> actual, double beta)
{
    if (predicted.size() != actual.size())
        throw ShapeError("intrinsic_reward: feature sizes differ (" + std::to_string(predicted.size())
                         + " vs " + std::to_string(actual.size()) + ")");
    if (!(beta >= 0.0))
        throw ContractError("intrinsic_reward: beta must be non-negative");
    double sq = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = static_cast<double>(predicted[i]) - static_cast<double>(actual[i]);
        sq += d * d;
    }
    return beta * sq;
}

std::vector<double> n_step_returns(std::span<const double> rewards, double bootstrap, double gamma)
{
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw ContractError("n_step_returns: gamma must be in (0, 1]");
    std::vector<double> out(rewards.size());
    double running = bootstrap;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        running = rewards[i] + gamma * running;
        out[i] = running;
    }
    return out;
}

std::vector<double> n_step_returns(const Rollout& rollout, double gamma)
{
    std::vector<double> rewards;
    rewards.reserve(rollout.transitions.size());
    for (const auto& t : rollout.transitions)
        rewards.push_back(t.combined_reward);
    const bool terminal = !rollout.transitions.empty() && rollout.transitions.back().done;
    return n_step_returns(rewards, terminal ? 0.0 : rollout.bootstrap_value, gamma);
}

template <typename T>
A3cLossVars a3c_loss(ad::Graph<T>& g, std::span<const StepOutputs> steps, std::span<const double> returns)
{
    if (steps.size() != returns.size())
        throw ContractError("a3c_loss: " + std::to_string(returns.size()) + " returns for "
                            + std::to_string(steps.size()) + " steps");
    if (steps.empty())
        throw ContractError("a3c_loss: empty rollout");
    std::vector<Var> policy_terms, value_terms, neg_entropy_terms;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto& s = steps[t];
        const double advantage = returns[t] - static_cast<double>(g.item(s.value));
        policy_terms.push_back(
            ad::scale(g, ad::pick(g, s.log_policy, static_cast<std::size_t>(s.action)), static_cast<T>(-advantage)));
        const Var err = ad::add_scalar(g, s.value, static_cast<T>(-returns[t]));
        value_terms.push_back(ad::scale(g, ad::square(g, err), T(0.5)));
        neg_entropy_terms.push_back(ad::sum(g, ad::mul(g, s.policy, s.log_policy)));
    }
    A3cLossVars out;
    out.policy_loss = ad::add_n<T>(g, policy_terms);
    out.value_loss = ad::add_n<T>(g, value_terms);
    out.entropy = ad::scale(g, ad::add_n<T>(g, neg_entropy_terms), T(-1));
    return out;
}

template <typename T>
PredictionLossVars prediction_loss(ad::Graph<T>& g, Var predicted, Var actual, int action,
                                   Var inverse_log_probs, double lambda_f, double lambda_i)
{
    double mass = 0.0;
    for (T lp : g.values(inverse_log_probs))
        mass += std::exp(static_cast<double>(lp));
    if (std::abs(mass - 1.0) > 1e-4)
        throw ContractError("prediction_loss: inverse model output is not a distribution (sums to "
                            + std::to_string(mass) + ")");
    if (action < 0 || static_cast<std::size_t>(action) >= g.value(inverse_log_probs).size())
        throw ContractError("prediction_loss: action out of range");

    PredictionLossVars out;
    const Var diff = ad::sub(g, predicted, actual);
    out.forward = ad::scale(g, ad::sum(g, ad::square(g, diff)), static_cast<T>(lambda_f / 2.0));
    out.inverse = ad::scale(g, ad::pick(g, inverse_log_probs, static_cast<std::size_t>(action)),
                            static_cast<T>(-lambda_i));
    return out;
}

template <typename T>
Var vpc_error(ad::Graph<T>& g, Var predicted_value, Var value_t, double reward, double gamma)
{
    if (!(gamma > 0.0))
        throw ContractError("vpc_error: gamma must be positive");
    if (g.requires_grad(predicted_value))
        throw ContractError("vpc_error: predicted value must be gradient-free");
    const double v_hat = static_cast<double>(g.item(predicted_value));
    // v_hat - (V - r) / gamma  ==  -V / gamma + (v_hat + r / gamma)
    return ad::add_scalar(g, ad::scale(g, value_t, static_cast<T>(-1.0 / gamma)),
                          static_cast<T>(v_hat + reward / gamma));
}

template <typename T>
Var vpc_loss(ad::Graph<T>& g, std::span<const Var> errors, double lambda_vpc, VpcMode mode)
{
    if (errors.empty())
        return g.constant(Tensor<T>::scalar(T(0)));
    const Var e = ad::concat<T>(g, errors);
    Var per_step = e;
    switch (mode) {
    case VpcMode::Squared: per_step = ad::square(g, e); break;
    case VpcMode::Abs: per_step = ad::abs(g, e); break;
    case VpcMode::Signed: break;
    }
    return ad::scale(g, ad::mean(g, per_step), static_cast<T>(lambda_vpc));
}

template <typename T>
TotalLoss total_loss(ad::Graph<T>& g, agent::Variant variant, const LossTerms& terms,
                     const LossCoefficients& coef)
{
    const bool prediction = agent::has_prediction(variant);
    const bool vpc = variant == agent::Variant::VPC;
    if (!terms.a3c.policy_loss.valid() || !terms.a3c.value_loss.valid() || !terms.a3c.entropy.valid())
        throw ContractError("total_loss: actor-critic terms are required");
    if (prediction != (terms.forward.valid() && terms.inverse.valid())
        || (!prediction && (terms.forward.valid() || terms.inverse.valid())))
        throw ContractError(std::string("total_loss: prediction terms do not match variant ")
                            + std::string(agent::variant_name(variant)));
    if (vpc != terms.vpc.valid())
        throw ContractError(std::string("total_loss: VPC terms do not match variant ")
                            + std::string(agent::variant_name(variant)));

    std::vector<Var> parts{terms.a3c.policy_loss,
                           ad::scale(g, terms.a3c.value_loss, static_cast<T>(coef.value_coef)),
                           ad::scale(g, terms.a3c.entropy, static_cast<T>(-coef.entropy_coef))};
    TotalLoss out;
    out.breakdown.policy_loss = g.item(terms.a3c.policy_loss);
    out.breakdown.value_loss = g.item(terms.a3c.value_loss);
    out.breakdown.entropy_bonus = g.item(terms.a3c.entropy);
    if (prediction) {
        parts.push_back(terms.forward);
        parts.push_back(terms.inverse);
        out.breakdown.forward_loss = g.item(terms.forward);
        out.breakdown.inverse_loss = g.item(terms.inverse);
    }
    if (vpc) {
        parts.push_back(terms.vpc);
        out.breakdown.vpc_loss = g.item(terms.vpc);
    }
    out.total = ad::add_n<T>(g, parts);
    out.breakdown.total = g.item(out.total);
    return out;
}

#define VPCLAB_INSTANTIATE_LOSSES(T)                                                                 \
    template double intrinsic_reward<T>(std::span<const T>, std::span<const T>, double);            \
    template A3cLossVars a3c_loss<T>(ad::Graph<T>&, std::span<const StepOutputs>,                   \
                                     std::span<const double>);                                     \
    template PredictionLossVars prediction_loss<T>(ad::Graph<T>&, Var, Var, int, Var, double, double); \
    template Var vpc_error<T>(ad::Graph<T>&, Var, Var, double, double);                              \
    template Var vpc_loss<T>(ad::Graph<T>&, std::span<const Var>, double, VpcMode);                  \
    template TotalLoss total_loss<T>(ad::Graph<T>&, agent::Variant, const LossTerms&,                \
                                     const LossCoefficients&);

VPCLAB_INSTANTIATE_LOSSES(float)
VPCLAB_INSTANTIATE_LOSSES(double)

} // namespace vpclab::loss
