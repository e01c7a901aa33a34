#pragma once

#include <cstdint>
#include <memory>
#include <utility>

#include "vpclab/maze.hpp"

namespace vpclab::env {

inline constexpr std::size_t kObsRows = 10;
inline constexpr std::size_t kObsCols = 30;
inline constexpr std::size_t kObsChannels = 3;
// Window cell that holds the agent.
inline constexpr int kAnchorRow = 5;
inline constexpr int kAnchorCol = 15;

enum Channel : std::size_t { kWallChannel = 0, kGoalChannel = 1, kAgentChannel = 2 };

inline constexpr double kStepPenalty = 0.001;
inline constexpr double kGoalReward = 1.0;

/// Agent-centred kObsRows x kObsCols x kObsChannels binary window.
using Observation = Tensor<float>;

Observation encode_observation(const Maze& maze, Pos agent);

struct EnvState {
    std::shared_ptr<const Maze> maze;
    Pos agent;
    int steps_taken = 0;
    bool done = false;
    std::uint64_t episode_seed = 0;
};

struct StepInfo {
    bool reached_goal = false;
    int steps_taken = 0;
};

struct StepResult {
    Observation observation;
    double extrinsic_reward = 0.0;
    bool done = false;
    StepInfo info;
};

/// Starts an episode at the maze's start cell. The environment is
/// deterministic; the seed is only recorded.
std::pair<EnvState, Observation> reset(std::shared_ptr<const Maze> maze, std::uint64_t seed);

/// Moves one cell unless blocked. Every step costs kStepPenalty; entering the
/// goal adds kGoalReward and ends the episode, as does reaching max_steps.
/// Throws ContractError when the episode is already done.
StepResult step(EnvState& state, Action action);

} // namespace vpclab::env
