#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vpclab/losses.hpp"
#include "vpclab/model.hpp"

namespace vpclab::train {

/// Every training hyperparameter. Serialized as a flat JSON object whose keys
/// are the field names below.
struct TrainConfig {
    agent::Variant variant = agent::Variant::PRED;
    std::string maze_file;
    int workers = 16;
    int rollout_length = 20;
    double gamma = 0.99;
    double lr = 1e-4;
    double beta = 5e-4;
    double lambda_f = 0.2;
    double lambda_i = 0.8;
    double lambda_vpc = 0.1;
    loss::VpcMode vpc_mode = loss::VpcMode::Squared;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double clip_norm = 40.0;
    std::uint64_t total_env_steps = 1'000'000;
    std::uint64_t seed = 0;
    // Env steps between checkpoints; 0 writes only the final checkpoint.
    std::uint64_t checkpoint_interval = 0;
    // Metrics rows buffered before the CSV is flushed.
    std::uint64_t metrics_flush_interval = 64;
    // false gives every worker its own Adam moments.
    bool shared_adam = true;
    // Reward used inside the consistency error: combined (true) or extrinsic only.
    bool vpc_combined_reward = true;
    // false writes 0 to wall_clock_s so metrics files are reproducible byte for byte.
    bool record_wall_clock = true;

    /// Throws ValidationError listing the first violated constraint.
    void validate() const;
    loss::LossCoefficients coefficients() const;
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
TrainConfig parse_config(std::string_view json_text);
/// Relative maze paths are resolved against the config file's directory.
TrainConfig load_config(const std::filesystem::path& path);
std::string to_json(const TrainConfig& config);

} // namespace vpclab::train
