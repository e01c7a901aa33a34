#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vpclab/maze.hpp"
#include "vpclab/metrics.hpp"
#include "vpclab/model.hpp"
#include "vpclab/params.hpp"

namespace vpclab::exp {

inline constexpr std::int64_t kDefaultBinWidth = 10'000;

/// Mean and standard error across runs of a metric binned by global step.
struct AggregateSeries {
    std::vector<double> x;    // bin centres
    std::vector<double> mean;
    std::vector<double> sem;  // sample stddev / sqrt(n_runs); 0 for a single run
    std::size_t n_runs = 0;
};

/// Within a run, each bin's value is the mean over workers of each worker's
/// mean in that bin. Across runs, bins missing from any run are dropped.
AggregateSeries aggregate(const std::vector<std::vector<MetricsRecord>>& runs, std::string_view metric,
                          std::int64_t bin_width = kDefaultBinWidth);
AggregateSeries aggregate_files(const std::vector<std::filesystem::path>& metrics_files,
                                std::string_view metric, std::int64_t bin_width = kDefaultBinWidth);

using LabeledSeries = std::pair<std::string, AggregateSeries>;

/// Data-to-pixel mapping of a rendered plot.
struct PlotLayout {
    double width = 760.0;
    double height = 460.0;
    double margin_left = 80.0;
    double margin_right = 150.0;
    double margin_top = 30.0;
    double margin_bottom = 60.0;
    double x_min = 0.0;
    double x_max = 1.0;
    double y_min = 0.0;
    double y_max = 1.0;

    double px(double x) const;
    double py(double y) const;
    double data_x(double px) const;
    double data_y(double py) const;

    /// Ranges covering every series including its mean +/- sem band.
    static PlotLayout fit(const std::vector<LabeledSeries>& series);
};

/// Standalone SVG: one mean line and one shaded mean +/- sem band per
/// series, axes with ticks, labels and a legend. Band polygons list the upper
/// edge left to right, then the lower edge right to left.
std::string render_svg(const std::vector<LabeledSeries>& series, std::string_view x_label,
                       std::string_view y_label);
void plot(const std::vector<LabeledSeries>& series, const std::filesystem::path& out_file,
          std::string_view y_label);

/// Human-readable maze report: size, start, goal, optimal length, step
/// limit and optimal return.
std::string maze_info(const env::Maze& maze);

struct EvalSummary {
    int episodes = 0;
    double mean_return = 0.0;
    double mean_length = 0.0;
    double success_rate = 0.0;
};

/// Greedy (argmax) episodes with the LSTM reset at each episode start.
EvalSummary evaluate(const ParamSet<float>& params, agent::Variant variant, const env::Maze& maze,
                     int episodes);
/// Loads a checkpoint (variant and observation shape from its manifest).
EvalSummary evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                const std::filesystem::path& maze_file, int episodes);

struct ExperimentOptions {
    int runs = 1;
    bool force = false;
    int parallel_runs = 1;
    const std::atomic<bool>* interrupt = nullptr;
};

/// Trains `runs` independent copies of the config into out_dir/run_<k> with
/// seed + k and run_id k. Refuses a non-empty out_dir unless forced.
std::vector<std::filesystem::path> run_experiment(const std::filesystem::path& config_file,
                                                  const std::filesystem::path& out_dir,
                                                  const ExperimentOptions& options);

} // namespace vpclab::exp
