#include "vpclab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <thread>

#include "vpclab/checkpoint.hpp"

namespace vpclab::train {

using ad::Var;

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

loss::LossBreakdown& operator+=(loss::LossBreakdown& a, const loss::LossBreakdown& b)
{
    a.policy_loss += b.policy_loss;
    a.value_loss += b.value_loss;
    a.entropy_bonus += b.entropy_bonus;
    a.forward_loss += b.forward_loss;
    a.inverse_loss += b.inverse_loss;
    a.vpc_loss += b.vpc_loss;
    a.total += b.total;
    return a;
}

loss::LossBreakdown scaled(loss::LossBreakdown b, double f)
{
    b.policy_loss *= f;
    b.value_loss *= f;
    b.entropy_bonus *= f;
    b.forward_loss *= f;
    b.inverse_loss *= f;
    b.vpc_loss *= f;
    b.total *= f;
    return b;
}

void check_finite(const loss::LossBreakdown& b)
{
    const std::pair<const char*, double> terms[] = {
        {"policy", b.policy_loss},   {"value", b.value_loss},     {"entropy", b.entropy_bonus},
        {"forward", b.forward_loss}, {"inverse", b.inverse_loss}, {"vpc", b.vpc_loss},
        {"total", b.total}};
    for (const auto& [name, v] : terms)
        if (!std::isfinite(v))
            throw NumericError(std::string("update: non-finite ") + name + " loss");
}

std::vector<float> to_vector(std::span<const float> s)
{
    return {s.begin(), s.end()};
}

} // namespace

std::uint64_t worker_seed(std::uint64_t seed, int worker_id)
{
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(worker_id) + 1));
}

// ---------------------------------------------------------------------------
// SharedTrainingState

SharedTrainingState::SharedTrainingState(const ParamSet<float>& initial, AdamHyper hyper)
    : hyper_(hyper)
{
    for (const auto& [name, t] : initial) {
        auto slot = std::make_unique<Slot>();
        slot->value = Tensor<float>(t.shape, t.data);
        slot->moments.first.assign(t.size(), 0.0f);
        slot->moments.second.assign(t.size(), 0.0f);
        slots_.emplace(name, std::move(slot));
    }
    version_ = initial.version();
}

void SharedTrainingState::snapshot_into(ParamSet<float>& out) const
{
    const std::uint64_t v = version_.load();
    for (const auto& [name, slot] : slots_) {
        auto& dst = out.at(name);
        std::lock_guard lock(slot->mu);
        dst.data = slot->value.data;
    }
    out.set_version(v);
}

ParamSet<float> SharedTrainingState::snapshot() const
{
    ParamSet<float> out;
    for (const auto& [name, slot] : slots_) {
        std::lock_guard lock(slot->mu);
        out.add(name, Tensor<float>(slot->value.shape, slot->value.data));
    }
    out.set_version(version_.load());
    return out;
}

std::uint64_t SharedTrainingState::apply(const ParamSet<float>& grads, double lr,
                                         AdamState<float>* private_moments)
{
    for (const auto& [name, slot] : slots_)
        if (!grads.contains(name))
            throw ContractError("apply: missing gradient for '" + name + "'");
    const std::uint64_t step = private_moments ? ++private_moments->step : ++step_;
    for (auto& [name, slot] : slots_) {
        std::lock_guard lock(slot->mu);
        AdamMoments<float>& m = private_moments ? private_moments->moments.at(name) : slot->moments;
        adam_update<float>(slot->value.data, grads.at(name).data, m, step, hyper_, lr);
    }
    return ++version_;
}

// ---------------------------------------------------------------------------
// Worker

Worker::Worker(int id, const TrainConfig& config, std::shared_ptr<const env::Maze> maze,
               SharedTrainingState& shared, WorkerOptions options)
    : id_(id), config_(config), maze_(std::move(maze)), shared_(shared), options_(options),
      rng_(worker_seed(config.seed, id))
{
    if (!maze_)
        throw ContractError("worker: null maze");
    params_ = shared_.snapshot();
    if (!config_.shared_adam)
        private_adam_ = AdamState<float>::for_params(params_, shared_.hyper());
    lstm_ = agent::LstmState<float>::zeros(dims_.lstm_units);
}

void Worker::sync()
{
    shared_.snapshot_into(params_);
}

void Worker::start_episode()
{
    auto [state, obs] = env::reset(maze_, worker_seed(rng_(), id_));
    env_ = std::move(state);
    obs_ = std::move(obs);
    lstm_ = agent::LstmState<float>::zeros(dims_.lstm_units);
    current_ = EpisodeAcc{};
    current_.index = episodes_started_++;
    episode_over_ = false;
}

int Worker::sample_action(std::span<const float> policy)
{
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    double cumulative = 0.0;
    int last_positive = 0;
    for (std::size_t a = 0; a < policy.size(); ++a) {
        if (policy[a] > 0.0f)
            last_positive = static_cast<int>(a);
        cumulative += static_cast<double>(policy[a]);
        if (u < cumulative)
            return static_cast<int>(a);
    }
    return last_positive;
}

loss::Rollout Worker::collect_rollout()
{
    using agent::Extractor;
    using agent::Variant;

    if (episode_over_)
        start_episode();

    const Variant variant = config_.variant;
    const bool prediction = agent::has_prediction(variant);
    const bool icm = variant == Variant::ICM;
    const bool vpc_pass = variant == Variant::VPC && options_.evaluate_predicted_value;

    graph_.clear();
    net_.emplace(variant, dims_, graph_, params_);
    auto& net = *net_;
    nodes_.clear();

    loss::Rollout rollout;
    rollout.worker_id = id_;
    rollout.snapshot_version = params_.version();
    rollout.initial_state = lstm_;

    ad::LstmVars state = net.state(lstm_);
    Var obs_var = net.observation(obs_);
    Var features = net.extract_features(obs_var);
    Var pred_features = icm ? net.extract_features(obs_var, Extractor::IcmCopy) : features;

    for (int t = 0; t < config_.rollout_length; ++t) {
        const agent::PolicyValueVars pv = net.policy_value(features, state);
        const int action = sample_action(graph_.values(pv.policy));

        loss::Transition tr;
        tr.observation = obs_;
        tr.action = action;
        tr.feature = to_vector(graph_.values(features));
        tr.value = graph_.item(pv.value);
        tr.policy = to_vector(graph_.values(pv.policy));
        tr.snapshot_version = params_.version();

        env::StepResult step = env::step(env_, static_cast<env::Action>(action));
        tr.extrinsic_reward = step.extrinsic_reward;
        tr.done = step.done;

        StepNodes nodes;
        nodes.a3c = {pv.log_policy, pv.policy, pv.value, action};

        Var next_features;
        Var next_pred_features;
        if (!step.done || prediction) {
            const Var next_obs = net.observation(step.observation);
            next_features = net.extract_features(next_obs);
            next_pred_features = icm ? net.extract_features(next_obs, Extractor::IcmCopy) : next_features;
        }

        if (prediction) {
            nodes.predicted = net.forward_model(pred_features, action);
            nodes.actual_next = next_pred_features;
            nodes.inverse_log_probs = ad::log_softmax(graph_, net.inverse_logits(pred_features, next_pred_features));
            tr.next_feature = to_vector(graph_.values(next_pred_features));
            tr.predicted_feature = to_vector(graph_.values(nodes.predicted));
            tr.intrinsic_reward = loss::intrinsic_reward<float>(tr.predicted_feature, tr.next_feature, config_.beta);
            current_.prediction_error_sum
                += std::sqrt(loss::intrinsic_reward<float>(tr.predicted_feature, tr.next_feature, 1.0));
            if (vpc_pass) {
                nodes.predicted_value = net.predicted_value(nodes.predicted, pv.state);
                tr.predicted_value = graph_.item(nodes.predicted_value);
            }
        }
        tr.combined_reward = tr.extrinsic_reward + tr.intrinsic_reward;

        current_.extrinsic_return += tr.extrinsic_reward;
        current_.intrinsic_sum += tr.intrinsic_reward;
        current_.length += 1;

        nodes_.push_back(nodes);
        rollout.transitions.push_back(std::move(tr));

        state = pv.state;
        obs_ = std::move(step.observation);
        if (step.done) {
            episode_over_ = true;
            break;
        }
        features = next_features;
        pred_features = next_pred_features;
    }

    if (episode_over_) {
        rollout.bootstrap_value = 0.0;
    } else {
        auto guard = graph_.no_grad();
        rollout.bootstrap_value = graph_.item(net.policy_value(features, state).value);
    }
    lstm_ = net.state_values(state);

    pending_ = true;
    pending_version_ = rollout.snapshot_version;
    return rollout;
}

loss::LossBreakdown Worker::update(const loss::Rollout& rollout)
{
    using agent::Variant;
    if (!pending_ || !net_)
        throw ContractError("update: no collected rollout pending (each rollout trains once)");
    if (rollout.snapshot_version != pending_version_ || rollout.worker_id != id_
        || rollout.transitions.size() != nodes_.size())
        throw ContractError("update: rollout does not match the last collected rollout");
    pending_ = false;

    const Variant variant = config_.variant;
    const auto coef = config_.coefficients();
    const auto returns = loss::n_step_returns(rollout, coef.gamma);

    std::vector<loss::StepOutputs> steps;
    steps.reserve(nodes_.size());
    for (const auto& n : nodes_)
        steps.push_back(n.a3c);

    loss::LossTerms terms;
    terms.a3c = loss::a3c_loss<float>(graph_, steps, returns);
    if (agent::has_prediction(variant)) {
        std::vector<Var> forward, inverse;
        for (std::size_t t = 0; t < nodes_.size(); ++t) {
            const auto p = loss::prediction_loss<float>(graph_, nodes_[t].predicted, nodes_[t].actual_next,
                                                        nodes_[t].a3c.action, nodes_[t].inverse_log_probs,
                                                        coef.lambda_f, coef.lambda_i);
            forward.push_back(p.forward);
            inverse.push_back(p.inverse);
        }
        terms.forward = ad::add_n<float>(graph_, forward);
        terms.inverse = ad::add_n<float>(graph_, inverse);
    }
    if (variant == Variant::VPC) {
        std::vector<Var> errors;
        for (std::size_t t = 0; t < nodes_.size(); ++t) {
            if (!nodes_[t].predicted_value.valid())
                throw ContractError("update: VPC rollout was collected without predicted values");
            const auto& tr = rollout.transitions[t];
            const double reward = config_.vpc_combined_reward ? tr.combined_reward : tr.extrinsic_reward;
            errors.push_back(loss::vpc_error<float>(graph_, nodes_[t].predicted_value, nodes_[t].a3c.value,
                                                    reward, coef.gamma));
        }
        terms.vpc = loss::vpc_loss<float>(graph_, errors, coef.lambda_vpc, coef.vpc_mode);
    }

    const loss::TotalLoss total = loss::total_loss<float>(graph_, variant, terms, coef);
    check_finite(total.breakdown);
    graph_.backward(total.total);

    ParamSet<float> grads = gradients(graph_, net_->binding(), params_);
    last_gradient_norm_ = clip_global_norm(grads, config_.clip_norm);
    shared_.apply(grads, config_.lr, private_adam_ ? &*private_adam_ : nullptr);

    const auto n = static_cast<std::uint64_t>(rollout.transitions.size());
    shared_.global_steps.fetch_add(n);
    env_steps_ += n;
    ++updates_;

    // A rollout never crosses an episode boundary, so its losses belong to
    // the current episode.
    current_.loss_sum += total.breakdown;
    current_.updates += 1;
    if (rollout.transitions.back().done)
        finished_.push_back(current_);

    sync();
    return total.breakdown;
}

std::vector<EpisodeSummary> Worker::take_finished_episodes()
{
    std::vector<EpisodeSummary> out;
    for (const auto& e : finished_) {
        EpisodeSummary s;
        s.worker_id = id_;
        s.episode_index = e.index;
        s.extrinsic_return = e.extrinsic_return;
        s.length = e.length;
        const double len = e.length > 0 ? e.length : 1;
        s.mean_intrinsic_reward = e.intrinsic_sum / len;
        s.mean_prediction_error_l2 = e.prediction_error_sum / len;
        s.losses = e.updates > 0 ? scaled(e.loss_sum, 1.0 / e.updates) : loss::LossBreakdown{};
        out.push_back(s);
    }
    finished_.clear();
    return out;
}

// ---------------------------------------------------------------------------
// train()

namespace {

/// Serializes metric rows from all workers into one CSV file.
class MetricsWriter {
public:
    MetricsWriter(const std::filesystem::path& path, std::uint64_t flush_every, bool threaded)
        : out_(path, std::ios::binary | std::ios::trunc), flush_every_(flush_every)
    {
        if (!out_)
            throw IoError("train: cannot write " + path.string());
        out_ << exp::csv_header();
        out_.flush();
        if (threaded)
            thread_ = std::thread([this] { run(); });
    }

    ~MetricsWriter() { close(); }

    void push(const exp::MetricsRecord& r)
    {
        if (!thread_.joinable()) {
            write(r);
            return;
        }
        {
            std::lock_guard lock(mu_);
            queue_.push_back(r);
        }
        cv_.notify_one();
    }

    void close()
    {
        if (thread_.joinable()) {
            {
                std::lock_guard lock(mu_);
                closing_ = true;
            }
            cv_.notify_one();
            thread_.join();
        }
        if (out_.is_open()) {
            out_.flush();
            out_.close();
        }
    }

    std::uint64_t rows() const { return rows_; }

private:
    void write(const exp::MetricsRecord& r)
    {
        out_ << exp::csv_row(r);
        if (++rows_ % flush_every_ == 0)
            out_.flush();
    }

    void run()
    {
        std::unique_lock lock(mu_);
        for (;;) {
            cv_.wait(lock, [this] { return closing_ || !queue_.empty(); });
            while (!queue_.empty()) {
                const exp::MetricsRecord r = queue_.front();
                queue_.pop_front();
                lock.unlock();
                write(r);
                lock.lock();
            }
            if (closing_)
                return;
        }
    }

    std::ofstream out_;
    std::uint64_t flush_every_;
    std::uint64_t rows_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<exp::MetricsRecord> queue_;
    bool closing_ = false;
    std::thread thread_;
};

} // namespace

RunArtifacts train(const TrainConfig& config, const std::filesystem::path& run_dir,
                   const RunOptions& options)
{
    config.validate();
    const auto maze = std::make_shared<const env::Maze>(env::load_maze(config.maze_file));

    std::error_code ec;
    std::filesystem::create_directories(run_dir / "checkpoints", ec);
    if (ec)
        throw IoError("train: cannot create run directory " + run_dir.string() + ": " + ec.message());
    {
        std::ofstream cfg(run_dir / "config.json", std::ios::trunc);
        cfg << to_json(config) << '\n';
        if (!cfg)
            throw IoError("train: cannot write " + (run_dir / "config.json").string());
    }

    RunArtifacts art;
    art.run_dir = run_dir;
    art.metrics_file = run_dir / "metrics.csv";

    const agent::ModelDims dims;
    SharedTrainingState shared(agent::init_params<float>(config.variant, dims, config.seed));
    const bool threaded = config.workers > 1;
    MetricsWriter writer(art.metrics_file, config.metrics_flush_interval, threaded);

    const auto started = std::chrono::steady_clock::now();
    std::mutex checkpoint_mu;
    const std::map<std::string, std::string> ckpt_meta{
        {"variant", std::string(agent::variant_name(config.variant))},
        {"obs_shape", std::to_string(dims.obs_rows) + "x" + std::to_string(dims.obs_cols) + "x"
                          + std::to_string(dims.obs_channels)},
        {"maze", maze->name()},
        {"seed", std::to_string(config.seed)}};
    auto save = [&](std::uint64_t step) {
        const auto dir = run_dir / "checkpoints" / ("step_" + std::to_string(step));
        const ParamSet<float> snap = shared.snapshot();
        std::lock_guard lock(checkpoint_mu);
        save_checkpoint(dir, snap, ckpt_meta);
        if (art.checkpoints.empty() || art.checkpoints.back() != dir)
            art.checkpoints.push_back(dir);
    };

    std::vector<std::unique_ptr<Worker>> workers;
    for (int i = 0; i < config.workers; ++i)
        workers.push_back(std::make_unique<Worker>(i, config, maze, shared));

    auto should_stop = [&] {
        if (options.interrupt && options.interrupt->load())
            shared.stop = true;
        return shared.stop.load() || shared.global_steps.load() >= config.total_env_steps;
    };

    auto loop = [&](Worker& w) {
        while (!should_stop()) {
            const loss::Rollout rollout = w.collect_rollout();
            const auto n = static_cast<std::uint64_t>(rollout.transitions.size());
            w.update(rollout);
            const std::uint64_t after = shared.global_steps.load();
            for (const auto& ep : w.take_finished_episodes()) {
                exp::MetricsRecord r;
                r.run_id = options.run_id;
                r.worker_id = ep.worker_id;
                r.global_step = static_cast<std::int64_t>(after);
                r.episode_index = ep.episode_index;
                r.episode_extrinsic_return = ep.extrinsic_return;
                r.episode_length = ep.length;
                r.mean_intrinsic_reward = ep.mean_intrinsic_reward;
                r.mean_prediction_error_l2 = ep.mean_prediction_error_l2;
                r.policy_loss = ep.losses.policy_loss;
                r.value_loss = ep.losses.value_loss;
                r.entropy = ep.losses.entropy_bonus;
                r.forward_loss = ep.losses.forward_loss;
                r.inverse_loss = ep.losses.inverse_loss;
                r.vpc_loss = ep.losses.vpc_loss;
                if (config.record_wall_clock)
                    r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
                writer.push(r);
            }
            const std::uint64_t ci = config.checkpoint_interval;
            if (ci > 0 && after / ci != (after - n) / ci)
                save(after);
        }
    };

    if (threaded) {
        std::vector<std::thread> threads;
        std::mutex error_mu;
        std::exception_ptr error;
        for (auto& w : workers)
            threads.emplace_back([&, wp = w.get()] {
                try {
                    loop(*wp);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error)
                        error = std::current_exception();
                    shared.stop = true;
                }
            });
        for (auto& t : threads)
            t.join();
        if (error) {
            writer.close();
            std::rethrow_exception(error);
        }
    } else {
        loop(*workers.front());
    }
    writer.close();

    art.global_steps = shared.global_steps.load();
    for (const auto& w : workers)
        art.worker_steps.push_back(w->env_steps());
    art.episodes = writer.rows();
    save(art.global_steps);
    return art;
}

} // namespace vpclab::train
