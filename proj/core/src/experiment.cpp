#include "vpclab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "vpclab/checkpoint.hpp"
#include "vpclab/config.hpp"
#include "vpclab/env.hpp"
#include "vpclab/errors.hpp"
#include "vpclab/trainer.hpp"

namespace vpclab::exp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- aggregation

namespace {

/// bin index -> per-run value (mean over workers of per-worker bin means).
std::map<std::int64_t, double> bin_run(const std::vector<MetricsRecord>& run, std::string_view metric,
                                       std::int64_t bin_width)
{
    struct Acc {
        double sum = 0.0;
        std::int64_t n = 0;
    };
    std::map<std::int64_t, std::map<std::int64_t, Acc>> bins; // bin -> worker -> acc
    for (const auto& r : run) {
        if (r.global_step < 0)
            throw ValidationError("aggregate: negative global_step");
        auto& acc = bins[r.global_step / bin_width][r.worker_id];
        acc.sum += metric_value(r, metric);
        ++acc.n;
    }
    std::map<std::int64_t, double> out;
    for (const auto& [bin, workers] : bins) {
        double total = 0.0;
        for (const auto& [w, acc] : workers)
            total += acc.sum / static_cast<double>(acc.n);
        out[bin] = total / static_cast<double>(workers.size());
    }
    return out;
}

} // namespace

AggregateSeries aggregate(const std::vector<std::vector<MetricsRecord>>& runs, std::string_view metric,
                          std::int64_t bin_width)
{
    if (bin_width <= 0)
        throw ValidationError("aggregate: bin width must be positive");
    if (runs.empty())
        throw ValidationError("aggregate: no runs");
    metric_value(MetricsRecord{}, metric); // rejects unknown columns up front

    std::vector<std::map<std::int64_t, double>> per_run;
    per_run.reserve(runs.size());
    for (const auto& run : runs)
        per_run.push_back(bin_run(run, metric, bin_width));

    AggregateSeries s;
    s.n_runs = runs.size();
    const double n = static_cast<double>(runs.size());
    for (const auto& [bin, first] : per_run.front()) {
        (void)first;
        std::vector<double> vals;
        for (const auto& m : per_run) {
            auto it = m.find(bin);
            if (it == m.end())
                break;
            vals.push_back(it->second);
        }
        if (vals.size() != runs.size())
            continue;
        double mean = 0.0;
        for (double v : vals)
            mean += v;
        mean /= n;
        double sem = 0.0;
        if (vals.size() > 1) {
            double ss = 0.0;
            for (double v : vals)
                ss += (v - mean) * (v - mean);
            sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        s.x.push_back((static_cast<double>(bin) + 0.5) * static_cast<double>(bin_width));
        s.mean.push_back(mean);
        s.sem.push_back(sem);
    }
    return s;
}

AggregateSeries aggregate_files(const std::vector<fs::path>& metrics_files, std::string_view metric,
                                std::int64_t bin_width)
{
    std::vector<std::vector<MetricsRecord>> runs;
    runs.reserve(metrics_files.size());
    for (const auto& f : metrics_files)
        runs.push_back(read_metrics(f));
    return aggregate(runs, metric, bin_width);
}

// ----------------------------------------------------------------------- plot

double PlotLayout::px(double x) const
{
    return margin_left + (x - x_min) / (x_max - x_min) * (width - margin_left - margin_right);
}

double PlotLayout::py(double y) const
{
    return height - margin_bottom - (y - y_min) / (y_max - y_min) * (height - margin_top - margin_bottom);
}

double PlotLayout::data_x(double p) const
{
    return x_min + (p - margin_left) / (width - margin_left - margin_right) * (x_max - x_min);
}

double PlotLayout::data_y(double p) const
{
    return y_min + (height - margin_bottom - p) / (height - margin_top - margin_bottom) * (y_max - y_min);
}

namespace {

void widen_if_flat(double& lo, double& hi)
{
    if (hi > lo)
        return;
    const double pad = lo == 0.0 ? 0.5 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
}

} // namespace

PlotLayout PlotLayout::fit(const std::vector<LabeledSeries>& series)
{
    PlotLayout l;
    bool any = false;
    double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
    for (const auto& [label, s] : series) {
        if (s.x.size() != s.mean.size() || s.x.size() != s.sem.size())
            throw ValidationError("plot: series '" + label + "' has mismatched lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double lo = s.mean[i] - s.sem[i];
            const double hi = s.mean[i] + s.sem[i];
            if (!std::isfinite(s.x[i]) || !std::isfinite(lo) || !std::isfinite(hi))
                throw ValidationError("plot: series '" + label + "' has non-finite values");
            if (!any) {
                x_lo = x_hi = s.x[i];
                y_lo = lo;
                y_hi = hi;
                any = true;
            }
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, lo);
            y_hi = std::max(y_hi, hi);
        }
    }
    if (!any)
        throw ValidationError("plot: no data points");
    widen_if_flat(x_lo, x_hi);
    widen_if_flat(y_lo, y_hi);
    const double ypad = 0.05 * (y_hi - y_lo);
    l.x_min = x_lo;
    l.x_max = x_hi;
    l.y_min = y_lo - ypad;
    l.y_max = y_hi + ypad;
    return l;
}

namespace {

std::string xml_escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string tick_label(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

} // namespace

std::string render_svg(const std::vector<LabeledSeries>& series, std::string_view x_label,
                       std::string_view y_label)
{
    const PlotLayout l = PlotLayout::fit(series);
    const double x0 = l.margin_left, x1 = l.width - l.margin_right;
    const double y0 = l.height - l.margin_bottom, y1 = l.margin_top;

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(l.width) << "\" height=\"" << num(l.height)
      << "\" viewBox=\"0 0 " << num(l.width) << ' ' << num(l.height) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(l.width) << "\" height=\"" << num(l.height)
      << "\" fill=\"white\"/>\n";

    o << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y0)
      << "\"/>\n"
      << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y1)
      << "\"/>\n";
    constexpr int kTicks = 5;
    for (int i = 0; i <= kTicks; ++i) {
        const double fx = l.x_min + (l.x_max - l.x_min) * i / kTicks;
        const double fy = l.y_min + (l.y_max - l.y_min) * i / kTicks;
        o << "<line x1=\"" << num(l.px(fx)) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(l.px(fx)) << "\" y2=\""
          << num(y0 + 5) << "\"/>\n";
        o << "<line x1=\"" << num(x0 - 5) << "\" y1=\"" << num(l.py(fy)) << "\" x2=\"" << num(x0) << "\" y2=\""
          << num(l.py(fy)) << "\"/>\n";
    }
    o << "</g>\n<g class=\"labels\" font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    for (int i = 0; i <= kTicks; ++i) {
        const double fx = l.x_min + (l.x_max - l.x_min) * i / kTicks;
        const double fy = l.y_min + (l.y_max - l.y_min) * i / kTicks;
        o << "<text x=\"" << num(l.px(fx)) << "\" y=\"" << num(y0 + 18) << "\" text-anchor=\"middle\">"
          << tick_label(fx) << "</text>\n";
        o << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(l.py(fy) + 4) << "\" text-anchor=\"end\">"
          << tick_label(fy) << "</text>\n";
    }
    o << "<text class=\"x-label\" x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(l.height - 15)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(x_label) << "</text>\n";
    o << "<text class=\"y-label\" x=\"18\" y=\"" << num((y0 + y1) / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " << num((y0 + y1) / 2) << ")\">"
      << xml_escape(y_label) << "</text>\n</g>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& [label, s] = series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        const std::string name = xml_escape(label);
        o << "<g class=\"series\" data-label=\"" << name << "\">\n";
        o << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            o << (i ? " " : "") << num(l.px(s.x[i])) << ',' << num(l.py(s.mean[i] + s.sem[i]));
        for (std::size_t i = s.x.size(); i-- > 0;)
            o << ' ' << num(l.px(s.x[i])) << ',' << num(l.py(s.mean[i] - s.sem[i]));
        o << "\"/>\n";
        o << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            o << (i ? " " : "") << num(l.px(s.x[i])) << ',' << num(l.py(s.mean[i]));
        o << "\"/>\n";
        const double ly = l.margin_top + 10 + 18.0 * static_cast<double>(k);
        o << "<line class=\"legend\" x1=\"" << num(x1 + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(x1 + 30)
          << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
        o << "<text class=\"legend\" x=\"" << num(x1 + 35) << "\" y=\"" << num(ly + 4)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << name << "</text>\n</g>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void plot(const std::vector<LabeledSeries>& series, const fs::path& out_file, std::string_view y_label)
{
    const std::string svg = render_svg(series, "global step", y_label);
    if (out_file.has_parent_path())
        fs::create_directories(out_file.parent_path());
    std::ofstream f(out_file, std::ios::binary);
    if (!f)
        throw IoError("plot: cannot write " + out_file.string());
    f << svg;
    if (!f)
        throw IoError("plot: write failed for " + out_file.string());
}

// ------------------------------------------------------------------ maze info

std::string maze_info(const env::Maze& maze)
{
    std::ostringstream o;
    o << "name: " << maze.name() << '\n'
      << "size: " << maze.rows() << "x" << maze.cols() << '\n'
      << "free_cells: " << maze.free_cells().size() << '\n'
      << "start: (" << maze.start().row << ", " << maze.start().col << ")\n"
      << "goal: (" << maze.goal().row << ", " << maze.goal().col << ")\n"
      << "shortest_path_length: " << env::shortest_path_length(maze) << '\n'
      << "max_steps: " << maze.max_steps() << '\n';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", env::optimal_return(maze));
    o << "optimal_return: " << buf << '\n';
    return o.str();
}

// ------------------------------------------------------------------- evaluate

EvalSummary evaluate(const ParamSet<float>& params, agent::Variant variant, const env::Maze& maze, int episodes)
{
    if (episodes <= 0)
        throw ValidationError("evaluate: episodes must be positive");
    const agent::ModelDims dims;
    const ParamSet<float> reference = agent::init_params<float>(variant, dims, 0);
    if (reference.names() != params.names())
        throw ValidationError("evaluate: parameters do not match the " + std::string(agent::variant_name(variant))
                              + " architecture");
    for (const auto& name : reference.names())
        if (reference.at(name).shape != params.at(name).shape)
            throw ValidationError("evaluate: shape mismatch for parameter " + name);

    auto shared_maze = std::make_shared<const env::Maze>(maze);
    ad::Graph<float> graph;
    ad::Graph<float>::NoGradGuard no_grad(graph);

    EvalSummary out;
    out.episodes = episodes;
    double total_return = 0.0, total_length = 0.0;
    int successes = 0;
    for (int e = 0; e < episodes; ++e) {
        auto [state, obs] = env::reset(shared_maze, static_cast<std::uint64_t>(e));
        auto lstm = agent::LstmState<float>::zeros(dims.lstm_units);
        double ret = 0.0;
        bool reached = false;
        while (!state.done) {
            graph.clear();
            agent::AgentNet<float> net(variant, dims, graph, params);
            const auto pv = net.policy_value(net.extract_features(net.observation(obs)), net.state(lstm));
            const auto probs = graph.values(pv.policy);
            const auto action = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
            lstm = net.state_values(pv.state);
            env::StepResult r = env::step(state, static_cast<env::Action>(action));
            ret += r.extrinsic_reward;
            reached = r.info.reached_goal;
            obs = std::move(r.observation);
        }
        total_return += ret;
        total_length += state.steps_taken;
        successes += reached ? 1 : 0;
    }
    out.mean_return = total_return / episodes;
    out.mean_length = total_length / episodes;
    out.success_rate = static_cast<double>(successes) / episodes;
    return out;
}

EvalSummary evaluate_checkpoint(const fs::path& checkpoint, const fs::path& maze_file, int episodes)
{
    Checkpoint info;
    const ParamSet<float> params = load_checkpoint<float>(checkpoint, &info);
    const env::Maze maze = env::load_maze(maze_file);

    const std::string expected_shape = std::to_string(env::kObsRows) + "x" + std::to_string(env::kObsCols) + "x"
                                       + std::to_string(env::kObsChannels);
    const auto shape_it = info.metadata.find("obs_shape");
    if (shape_it == info.metadata.end())
        throw ValidationError("evaluate: checkpoint metadata lacks obs_shape");
    if (shape_it->second != expected_shape)
        throw ValidationError("evaluate: checkpoint observation shape " + shape_it->second
                              + " does not match environment shape " + expected_shape);
    const auto variant_it = info.metadata.find("variant");
    if (variant_it == info.metadata.end())
        throw ValidationError("evaluate: checkpoint metadata lacks variant");
    return evaluate(params, agent::parse_variant(variant_it->second), maze, episodes);
}

// ----------------------------------------------------------------- experiment

std::vector<fs::path> run_experiment(const fs::path& config_file, const fs::path& out_dir,
                                     const ExperimentOptions& options)
{
    if (options.runs <= 0)
        throw ValidationError("experiment: runs must be positive");
    if (options.parallel_runs <= 0)
        throw ValidationError("experiment: parallel runs must be positive");
    const train::TrainConfig base = train::load_config(config_file);

    std::error_code ec;
    if (fs::exists(out_dir, ec)) {
        if (!fs::is_directory(out_dir))
            throw IoError("experiment: " + out_dir.string() + " is not a directory");
        if (!fs::is_empty(out_dir) && !options.force)
            throw ValidationError("experiment: output directory " + out_dir.string()
                                  + " is not empty (use --force to overwrite)");
    }
    fs::create_directories(out_dir, ec);
    if (ec)
        throw IoError("experiment: cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<fs::path> dirs;
    for (int k = 0; k < options.runs; ++k)
        dirs.push_back(out_dir / ("run_" + std::to_string(k)));
    for (const auto& d : dirs)
        fs::remove_all(d);

    auto run_one = [&](int k) {
        train::TrainConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(k);
        train::train(cfg, dirs[static_cast<std::size_t>(k)], {k, options.interrupt});
    };

    const int parallel = std::min(options.parallel_runs, options.runs);
    if (parallel == 1) {
        for (int k = 0; k < options.runs; ++k)
            run_one(k);
        return dirs;
    }
    std::atomic<int> next{0};
    std::mutex error_mu;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (int t = 0; t < parallel; ++t)
        pool.emplace_back([&] {
            for (int k; (k = next.fetch_add(1)) < options.runs;) {
                {
                    std::lock_guard lock(error_mu);
                    if (error)
                        return;
                }
                try {
                    run_one(k);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
    return dirs;
}

} // namespace vpclab::exp
