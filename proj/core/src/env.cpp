#include "vpclab/env.hpp"

namespace vpclab::env {

Observation encode_observation(const Maze& maze, Pos agent)
{
    Observation obs({kObsRows, kObsCols, kObsChannels});
    for (std::size_t wr = 0; wr < kObsRows; ++wr) {
        for (std::size_t wc = 0; wc < kObsCols; ++wc) {
            const Pos cell{agent.row + static_cast<int>(wr) - kAnchorRow,
                           agent.col + static_cast<int>(wc) - kAnchorCol};
            float* px = obs.data.data() + (wr * kObsCols + wc) * kObsChannels;
            px[kWallChannel] = maze.is_wall(cell) ? 1.0f : 0.0f;
            px[kGoalChannel] = cell == maze.goal() ? 1.0f : 0.0f;
            px[kAgentChannel] = cell == agent ? 1.0f : 0.0f;
        }
    }
    return obs;
}

std::pair<EnvState, Observation> reset(std::shared_ptr<const Maze> maze, std::uint64_t seed)
{
    if (!maze)
        throw ContractError("reset: null maze");
    EnvState s;
    s.agent = maze->start();
    s.episode_seed = seed;
    s.maze = std::move(maze);
    Observation obs = encode_observation(*s.maze, s.agent);
    return {std::move(s), std::move(obs)};
}

StepResult step(EnvState& state, Action action)
{
    if (state.done)
        throw ContractError("step: episode already finished");
    const Maze& maze = *state.maze;
    const Pos next = moved(state.agent, action);
    if (!maze.is_wall(next))
        state.agent = next;
    ++state.steps_taken;

    StepResult r;
    r.info.reached_goal = state.agent == maze.goal();
    r.info.steps_taken = state.steps_taken;
    r.extrinsic_reward = r.info.reached_goal ? kGoalReward - kStepPenalty : -kStepPenalty;
    state.done = r.info.reached_goal || state.steps_taken >= maze.max_steps();
    r.done = state.done;
    r.observation = encode_observation(maze, state.agent);
    return r;
}

} // namespace vpclab::env
