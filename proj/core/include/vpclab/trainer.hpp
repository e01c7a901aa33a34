#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

#include "vpclab/adam.hpp"
#include "vpclab/config.hpp"
#include "vpclab/env.hpp"
#include "vpclab/losses.hpp"
#include "vpclab/metrics.hpp"
#include "vpclab/model.hpp"

namespace vpclab::train {

/// Per-worker RNG seed derived from the run seed.
std::uint64_t worker_seed(std::uint64_t seed, int worker_id);

/// Parameters, optimizer moments and counters shared by all workers.
/// Each parameter tensor has its own lock: readers copy a tensor under its
/// lock, writers apply an Adam update to it under the same lock. Tensors are
/// updated independently of each other (Hogwild-style).
class SharedTrainingState {
public:
    SharedTrainingState(const ParamSet<float>& initial, AdamHyper hyper = {});

    /// Copies every tensor into `out` (whose names must match) and stamps it
    /// with the version current at the start of the copy.
    void snapshot_into(ParamSet<float>& out) const;
    ParamSet<float> snapshot() const;

    /// One Adam step. With `private_moments` the caller's own moments are
    /// used instead of the shared ones. Returns the new parameter version.
    std::uint64_t apply(const ParamSet<float>& grads, double lr, AdamState<float>* private_moments = nullptr);

    std::uint64_t version() const { return version_.load(); }
    std::uint64_t adam_step() const { return step_.load(); }
    const AdamHyper& hyper() const { return hyper_; }

    std::atomic<std::uint64_t> global_steps{0};
    std::atomic<bool> stop{false};

private:
    struct Slot {
        mutable std::mutex mu;
        Tensor<float> value;
        AdamMoments<float> moments;
    };

    std::map<std::string, std::unique_ptr<Slot>> slots_;
    AdamHyper hyper_;
    std::atomic<std::uint64_t> step_{0};
    std::atomic<std::uint64_t> version_{0};
};

struct EpisodeSummary {
    int worker_id = 0;
    std::int64_t episode_index = 0;
    double extrinsic_return = 0.0;
    int length = 0;
    double mean_intrinsic_reward = 0.0;
    double mean_prediction_error_l2 = 0.0;
    // Mean over the updates that trained on this episode's steps.
    loss::LossBreakdown losses;
};

struct WorkerOptions {
    // VPC only: run the predicted-value pass during collection. Turning it
    // off must not change the trajectory.
    bool evaluate_predicted_value = true;
};

/// One asynchronous actor-learner: a private model copy, environment and RNG.
class Worker {
public:
    Worker(int id, const TrainConfig& config, std::shared_ptr<const env::Maze> maze,
           SharedTrainingState& shared, WorkerOptions options = {});

    int id() const { return id_; }

    /// Plays up to rollout_length steps with the current parameter snapshot,
    /// stopping early at the end of an episode. The recorded graph is kept
    /// for the following update().
    loss::Rollout collect_rollout();

    /// Loss on the last collected rollout, backward pass, global-norm clip,
    /// Adam step on the shared parameters, snapshot refresh. Returns, and
    /// advances the global step counter by, the rollout's length. A rollout
    /// can be used once only.
    loss::LossBreakdown update(const loss::Rollout& rollout);

    /// Episodes finished since the last call, with their losses attached.
    std::vector<EpisodeSummary> take_finished_episodes();

    /// Refreshes the local parameter snapshot from the shared state.
    void sync();

    std::uint64_t env_steps() const { return env_steps_; }
    std::uint64_t updates() const { return updates_; }
    double last_gradient_norm() const { return last_gradient_norm_; }
    const ParamSet<float>& params() const { return params_; }
    const agent::LstmState<float>& lstm_state() const { return lstm_; }

private:
    struct StepNodes {
        loss::StepOutputs a3c;
        ad::Var predicted;
        ad::Var actual_next;
        ad::Var inverse_log_probs;
        ad::Var predicted_value;
    };

    struct EpisodeAcc {
        std::int64_t index = 0;
        double extrinsic_return = 0.0;
        int length = 0;
        double intrinsic_sum = 0.0;
        double prediction_error_sum = 0.0;
        loss::LossBreakdown loss_sum;
        int updates = 0;
    };

    int sample_action(std::span<const float> policy);
    void start_episode();

    int id_;
    TrainConfig config_;
    std::shared_ptr<const env::Maze> maze_;
    SharedTrainingState& shared_;
    WorkerOptions options_;
    agent::ModelDims dims_;

    ParamSet<float> params_;
    std::optional<AdamState<float>> private_adam_;
    std::mt19937_64 rng_;

    env::EnvState env_;
    env::Observation obs_;
    bool episode_over_ = true;
    agent::LstmState<float> lstm_;

    ad::Graph<float> graph_;
    std::optional<agent::AgentNet<float>> net_;
    std::vector<StepNodes> nodes_;
    bool pending_ = false;
    std::uint64_t pending_version_ = 0;

    EpisodeAcc current_;
    std::vector<EpisodeAcc> finished_;
    std::int64_t episodes_started_ = 0;
    std::uint64_t env_steps_ = 0;
    std::uint64_t updates_ = 0;
    double last_gradient_norm_ = 0.0;
};

struct RunOptions {
    std::int64_t run_id = 0;
    // Polled between rollouts; setting it stops the run early.
    const std::atomic<bool>* interrupt = nullptr;
};

struct RunArtifacts {
    std::filesystem::path run_dir;
    std::filesystem::path metrics_file;
    std::vector<std::filesystem::path> checkpoints;
    std::uint64_t global_steps = 0;
    std::vector<std::uint64_t> worker_steps;
    std::uint64_t episodes = 0;
};

/// Runs `config.workers` workers until the global step counter reaches
/// total_env_steps. Writes config.json, metrics.csv and checkpoints/step_<N>
/// under run_dir. With one worker everything runs on the calling thread.
RunArtifacts train(const TrainConfig& config, const std::filesystem::path& run_dir,
                   const RunOptions& options = {});

} // namespace vpclab::train
