#include "vpclab/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vpclab::train {

using nlohmann::json;

void TrainConfig::validate() const
{
    if (workers < 1)
        throw ValidationError("config: workers must be >= 1");
    if (rollout_length < 1)
        throw ValidationError("config: rollout_length must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw ValidationError("config: gamma must be in (0, 1]");
    if (!(lr > 0.0))
        throw ValidationError("config: lr must be positive");
    if (beta < 0.0 || lambda_f < 0.0 || lambda_i < 0.0 || lambda_vpc < 0.0)
        throw ValidationError("config: beta and lambda_* must be >= 0");
    if (entropy_coef < 0.0 || value_coef < 0.0)
        throw ValidationError("config: entropy_coef and value_coef must be >= 0");
    if (!(clip_norm > 0.0))
        throw ValidationError("config: clip_norm must be positive");
    if (metrics_flush_interval == 0)
        throw ValidationError("config: metrics_flush_interval must be >= 1");
}

loss::LossCoefficients TrainConfig::coefficients() const
{
    loss::LossCoefficients c;
    c.gamma = gamma;
    c.value_coef = value_coef;
    c.entropy_coef = entropy_coef;
    c.lambda_f = lambda_f;
    c.lambda_i = lambda_i;
    c.lambda_vpc = lambda_vpc;
    c.vpc_mode = vpc_mode;
    return c;
}

namespace {

json to_json_object(const TrainConfig& c)
{
    return json{{"variant", agent::variant_name(c.variant)},
                {"maze_file", c.maze_file},
                {"workers", c.workers},
                {"rollout_length", c.rollout_length},
                {"gamma", c.gamma},
                {"lr", c.lr},
                {"beta", c.beta},
                {"lambda_f", c.lambda_f},
                {"lambda_i", c.lambda_i},
                {"lambda_vpc", c.lambda_vpc},
                {"vpc_mode", loss::vpc_mode_name(c.vpc_mode)},
                {"entropy_coef", c.entropy_coef},
                {"value_coef", c.value_coef},
                {"clip_norm", c.clip_norm},
                {"total_env_steps", c.total_env_steps},
                {"seed", c.seed},
                {"checkpoint_interval", c.checkpoint_interval},
                {"metrics_flush_interval", c.metrics_flush_interval},
                {"shared_adam", c.shared_adam},
                {"vpc_combined_reward", c.vpc_combined_reward},
                {"record_wall_clock", c.record_wall_clock}};
}

} // namespace

TrainConfig parse_config(std::string_view json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw FormatError("config: expected a JSON object");

    TrainConfig c;
    const json known = to_json_object(c);
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw FormatError("config: unknown key '" + key + "'");

    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key))
                j.at(key).get_to(field);
        };
        if (j.contains("variant"))
            c.variant = agent::parse_variant(j.at("variant").get<std::string>());
        if (j.contains("vpc_mode"))
            c.vpc_mode = loss::parse_vpc_mode(j.at("vpc_mode").get<std::string>());
        get("maze_file", c.maze_file);
        get("workers", c.workers);
        get("rollout_length", c.rollout_length);
        get("gamma", c.gamma);
        get("lr", c.lr);
        get("beta", c.beta);
        get("lambda_f", c.lambda_f);
        get("lambda_i", c.lambda_i);
        get("lambda_vpc", c.lambda_vpc);
        get("entropy_coef", c.entropy_coef);
        get("value_coef", c.value_coef);
        get("clip_norm", c.clip_norm);
        get("total_env_steps", c.total_env_steps);
        get("seed", c.seed);
        get("checkpoint_interval", c.checkpoint_interval);
        get("metrics_flush_interval", c.metrics_flush_interval);
        get("shared_adam", c.shared_adam);
        get("vpc_combined_reward", c.vpc_combined_reward);
        get("record_wall_clock", c.record_wall_clock);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    TrainConfig c = parse_config(ss.str());
    if (!c.maze_file.empty()) {
        const std::filesystem::path maze(c.maze_file);
        if (maze.is_relative())
            c.maze_file = (path.parent_path() / maze).lexically_normal().string();
    }
    return c;
}

std::string to_json(const TrainConfig& config)
{
    return to_json_object(config).dump(2);
}

} // namespace vpclab::train
