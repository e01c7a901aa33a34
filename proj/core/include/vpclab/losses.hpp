#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vpclab/env.hpp"
#include "vpclab/model.hpp"

namespace vpclab::loss {

/// How per-step consistency errors become a loss. `Signed` is the literal
/// lambda * e form; `Squared` is the default.
enum class VpcMode { Squared, Abs, Signed };

std::string_view vpc_mode_name(VpcMode m);
VpcMode parse_vpc_mode(std::string_view name);

/// Value-level record of one environment step.
struct Transition {
    env::Observation observation;
    int action = 0;
    double extrinsic_reward = 0.0;
    double intrinsic_reward = 0.0;
    double combined_reward = 0.0;
    bool done = false;
    std::vector<float> feature;
    std::vector<float> next_feature;
    std::vector<float> predicted_feature;
    double value = 0.0;
    std::optional<double> predicted_value;
    std::vector<float> policy;
    std::uint64_t snapshot_version = 0;
};

/// Contiguous on-policy segment. bootstrap_value is 0 when the last
/// transition ended the episode.
struct Rollout {
    std::vector<Transition> transitions;
    double bootstrap_value = 0.0;
    agent::LstmState<float> initial_state;
    std::uint64_t snapshot_version = 0;
    int worker_id = 0;
};

struct LossBreakdown {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy_bonus = 0.0;
    double forward_loss = 0.0;
    double inverse_loss = 0.0;
    double vpc_loss = 0.0;
    double total = 0.0;
};

struct LossCoefficients {
    double gamma = 0.99;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    double lambda_f = 0.2;
    double lambda_i = 0.8;
    double lambda_vpc = 0.1;
    VpcMode vpc_mode = VpcMode::Squared;
};

/// beta * ||predicted - actual||^2. A plain number: it never enters a graph.
template <typename T>
double intrinsic_reward(std::span<const T> predicted, std::span<const T> actual, double beta);

/// R_t = r_t + gamma R_{t+1}, seeded with the bootstrap value.
std::vector<double> n_step_returns(std::span<const double> rewards, double bootstrap, double gamma);
/// Same, over the rollout's combined rewards.
std::vector<double> n_step_returns(const Rollout& rollout, double gamma);

/// Graph handles of one step's actor-critic outputs.
struct StepOutputs {
    ad::Var log_policy;
    ad::Var policy;
    ad::Var value;
    int action = 0;
};

struct A3cLossVars {
    ad::Var policy_loss;
    ad::Var value_loss;
    ad::Var entropy;
};

/// Sums over steps of -log pi(a_t) * A_t (advantage held constant),
/// 0.5 (R_t - V_t)^2 and the policy entropy.
template <typename T>
A3cLossVars a3c_loss(ad::Graph<T>& g, std::span<const StepOutputs> steps, std::span<const double> returns);

struct PredictionLossVars {
    ad::Var forward;
    ad::Var inverse;
};

/// (lambda_f / 2) ||predicted - actual||^2 and lambda_i times the cross
/// entropy of the taken action under the inverse model. `inverse_log_probs`
/// must be a log distribution (probabilities summing to 1 within 1e-4).
template <typename T>
PredictionLossVars prediction_loss(ad::Graph<T>& g, ad::Var predicted, ad::Var actual, int action,
                                   ad::Var inverse_log_probs, double lambda_f, double lambda_i);

/// e = V_hat - (V_t - r) / gamma. V_hat must be a gradient-free node.
template <typename T>
ad::Var vpc_error(ad::Graph<T>& g, ad::Var predicted_value, ad::Var value_t, double reward, double gamma);

/// lambda_vpc times the mean of e^2, |e| or e over the steps.
template <typename T>
ad::Var vpc_loss(ad::Graph<T>& g, std::span<const ad::Var> errors, double lambda_vpc, VpcMode mode);

/// Terms to combine. forward/inverse are sums over steps; vpc is already the
/// aggregated loss. Absent terms are invalid Vars.
struct LossTerms {
    A3cLossVars a3c;
    ad::Var forward;
    ad::Var inverse;
    ad::Var vpc;
};

struct TotalLoss {
    ad::Var total;
    LossBreakdown breakdown;
};

/// total = policy + value_coef * value - entropy_coef * entropy
///         + forward + inverse + vpc.
/// Throws ContractError when the supplied terms do not match the variant.
template <typename T>
TotalLoss total_loss(ad::Graph<T>& g, agent::Variant variant, const LossTerms& terms,
                     const LossCoefficients& coef);

} // namespace vpclab::loss
