#include "rlihf/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <malloc.h>
#include <mutex>
#include <sstream>
#include <thread>

namespace rlihf::harness {

void ExperimentConfig::validate() const {
    if (conditions.empty()) throw std::invalid_argument("experiment: conditions must not be empty");
    if (!(w_hf >= 0.0)) throw std::invalid_argument("experiment: w_hf must be >= 0");
    for (double w : sweep_weights)
        if (!(w >= 0.0)) throw std::invalid_argument("experiment: sweep weights must be >= 0");
    if (total_steps < 1) throw std::invalid_argument("experiment: total_steps must be >= 1");
    if (episode_len < 1) throw std::invalid_argument("experiment: episode_len must be >= 1");
    if (eval_interval < 1) throw std::invalid_argument("experiment: eval_interval must be >= 1");
    if (eval_rollouts < 1) throw std::invalid_argument("experiment: eval_rollouts must be >= 1");
    if (seeds < 1) throw std::invalid_argument("experiment: seeds must be >= 1");
    if (parallel < 1) throw std::invalid_argument("experiment: parallel must be >= 1");
}

void Config::validate() const {
    effective_scenario(*this).validate();
    if (!(planner.cell > 0.0)) throw std::invalid_argument("planner: cell must be > 0");
    if (!(planner.clearance_weight >= 0.0)) throw std::invalid_argument("planner: clearance_weight must be >= 0");
    sac.validate();
    pipeline.validate();
    experiment.validate();
}

env::Scenario effective_scenario(const Config& cfg) {
    env::Scenario s = cfg.scenario;
    s.max_steps = cfg.experiment.episode_len;
    return s;
}

EvalRecord evaluate(const agent::Actor& policy, const env::Scenario& scenario,
                    std::shared_ptr<const env::IdealPath> ideal, int n, Rng& rng, std::vector<Rollout>* rollouts) {
    if (n < 1) throw std::invalid_argument("evaluate: need at least one rollout");
    env::Environment environment(scenario, ideal);
    Rng unused(0);  // deterministic actions never draw
    std::vector<double> returns;
    EvalRecord rec;
    rec.rollouts = n;
    for (int i = 0; i < n; ++i) {
        Rollout r;
        Eigen::VectorXd obs = environment.reset(rng);
        r.points.push_back({0, environment.state().pos, false, false, ideal->distance(environment.state().pos)});
        for (;;) {
            const auto [action, logp] = policy.act(obs, unused, true);
            const env::StepOutcome out = environment.step(action);
            r.ret += env::reward_unified_eval(out, *ideal, scenario.rewards);
            r.points.push_back({out.after.step, out.after.pos, out.after.carrying, out.info.collision,
                                out.info.deviation});
            obs = out.observation;
            if (out.done) break;
        }
        std::vector<env::Vec2> traj;
        traj.reserve(r.points.size());
        for (const auto& p : r.points) traj.push_back(p.pos);
        r.success = environment.state().success;
        r.efficiency = env::path_efficiency(traj, *ideal, environment.state(), scenario);
        r.deviation = env::path_deviation(traj, *ideal);
        returns.push_back(r.ret);
        rec.successes += r.success ? 1 : 0;
        rec.path_efficiency += r.efficiency / n;
        rec.path_deviation += r.deviation / n;
        if (rollouts) rollouts->push_back(std::move(r));
    }
    double mean = 0.0;
    for (double v : returns) mean += v / n;
    double var = 0.0;
    for (double v : returns) var += (v - mean) * (v - mean) / n;
    rec.mean_return = mean;
    rec.return_std = std::sqrt(var);
    rec.success_rate = static_cast<double>(rec.successes) / n;
    return rec;
}

std::string RunSpec::label() const {
    std::ostringstream os;
    os << fusion::to_string(condition);
    if (condition == fusion::Condition::rlihf) os << "_w" << w_hf;
    os << "_seed" << seed_index;
    return os.str();
}

std::uint64_t run_seed(std::uint64_t master_seed, int seed_index) {
    return derive_seed(master_seed, "run" + std::to_string(seed_index));
}

std::vector<long> eval_steps(long total_steps, long eval_interval) {
    std::vector<long> steps;
    for (long s = eval_interval; s <= total_steps; s += eval_interval) steps.push_back(s);
    if (steps.empty() || steps.back() != total_steps) steps.push_back(total_steps);
    return steps;
}

namespace {

// Batch-sized Eigen temporaries sit just above glibc's default mmap threshold,
// so every update would otherwise map and unmap fresh pages.
void keep_heap_warm() {
    static std::once_flag once;
    std::call_once(once, [] {
        mallopt(M_MMAP_THRESHOLD, 64 << 20);
        mallopt(M_TRIM_THRESHOLD, 256 << 20);
    });
}

}  // namespace

RunResult run_training(const Config& cfg, const RunSpec& spec, std::shared_ptr<const env::IdealPath> ideal,
                       std::shared_ptr<const decoder::ErrpClassifier> classifier) {
    keep_heap_warm();
    cfg.validate();
    const env::Scenario scenario = effective_scenario(cfg);
    if (!ideal) ideal = std::make_shared<const env::IdealPath>(env::compute_ideal_path(scenario, cfg.planner));
    const auto& ex = cfg.experiment;

    Rng env_rng = make_stream(spec.seed, "env");
    Rng agent_rng = make_stream(spec.seed, "agent");
    const std::uint64_t channel_seed = derive_seed(spec.seed, "channel");
    const std::uint64_t eval_seed = derive_seed(spec.seed, "eval");

    std::unique_ptr<fusion::FeedbackPipeline> pipeline;
    if (spec.condition == fusion::Condition::rlihf) {
        if (cfg.pipeline.mode == fusion::FeedbackMode::decoded && !classifier)
            classifier = fusion::calibrate_decoder(cfg.pipeline, derive_seed(channel_seed, "calibration"));
        pipeline = std::make_unique<fusion::FeedbackPipeline>(cfg.pipeline, channel_seed, classifier);
    }

    env::Environment environment(scenario, ideal);
    const int obs_dim = scenario.observation_dim();
    constexpr int kActionDim = 2;
    agent::SacAgent agent(obs_dim, kActionDim, cfg.sac, agent_rng);
    agent::ReplayBuffer buffer(cfg.sac.buffer_capacity, obs_dim, kActionDim);
    const long update_after = std::max<long>(cfg.sac.start_steps, cfg.sac.batch_size);

    RunResult result;
    result.spec = spec;
    const auto checkpoints = eval_steps(ex.total_steps, ex.eval_interval);
    std::size_t next_eval = 0;

    Eigen::VectorXd obs = environment.reset(env_rng);
    result.episodes = 1;
    for (long t = 1; t <= ex.total_steps; ++t) {
        Eigen::VectorXd action(kActionDim);
        if (t <= cfg.sac.start_steps) {
            for (int i = 0; i < kActionDim; ++i) action[i] = uniform(agent_rng, -1.0, 1.0);
        } else {
            action = agent.act(obs, agent_rng, false).first;
        }
        const env::StepOutcome out = environment.step(action);
        const fusion::CompositeReward reward =
            fusion::condition_reward(spec.condition, out, scenario, *ideal, pipeline.get(), spec.w_hf);
        if (ex.reward_log) result.reward_log.push_back({t, spec.condition, reward, spec.w_hf});
        // Only reaching the goal is terminal; timeouts bootstrap.
        buffer.add({obs, action, reward.total, out.observation, out.info.success});
        obs = out.observation;
        if (out.done && t < ex.total_steps) {
            obs = environment.reset(env_rng);
            ++result.episodes;
        }
        if (t >= update_after && t % cfg.sac.update_every == 0)
            for (int k = 0; k < cfg.sac.update_every; ++k) agent.update(buffer, agent_rng);
        if (next_eval < checkpoints.size() && t == checkpoints[next_eval]) {
            Rng eval_rng(eval_seed);
            EvalRecord rec = evaluate(agent.actor(), scenario, ideal, ex.eval_rollouts, eval_rng);
            rec.step = t;
            result.evals.push_back(rec);
            ++next_eval;
        }
    }
    if (pipeline) {
        result.feedback_events = pipeline->events();
        result.online_accuracy = pipeline->online_accuracy();
    }
    result.policy = agent.actor();
    return result;
}

std::vector<RunSpec> plan_runs(const Config& cfg) {
    std::vector<RunSpec> specs;
    for (auto c : cfg.experiment.conditions)
        for (int k = 0; k < cfg.experiment.seeds; ++k)
            specs.push_back({c, c == fusion::Condition::rlihf ? cfg.experiment.w_hf : 0.0, k,
                             run_seed(cfg.experiment.master_seed, k)});
    return specs;
}

std::vector<RunSpec> plan_sweep(const Config& cfg) {
    std::vector<RunSpec> specs;
    for (double w : cfg.experiment.sweep_weights)
        for (int k = 0; k < cfg.experiment.seeds; ++k)
            specs.push_back({fusion::Condition::rlihf, w, k, run_seed(cfg.experiment.master_seed, k)});
    return specs;
}

std::vector<RunResult> run_all(const Config& cfg, const std::vector<RunSpec>& specs, int parallel) {
    cfg.validate();
    const auto ideal =
        std::make_shared<const env::IdealPath>(env::compute_ideal_path(effective_scenario(cfg), cfg.planner));
    std::vector<std::optional<RunResult>> slots(specs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            try {
                slots[i] = run_training(cfg, specs[i], ideal);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = specs.size();
                return;
            }
        }
    };
    const int workers = std::max(1, std::min<int>(parallel, static_cast<int>(specs.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    std::vector<RunResult> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

std::vector<decoder::SubjectData> synth_cohort(const fusion::PipelineConfig& cfg, std::uint64_t seed,
                                               std::vector<signal::SubjectProfile>* profiles) {
    cfg.validate();
    Rng rng = make_stream(seed, "cohort");
    const auto cohort =
        signal::make_cohort(cfg.cohort_subjects, cfg.cohort_noise_min, cfg.cohort_noise_max, cfg.signal.channels, rng);
    std::vector<decoder::SubjectData> out;
    for (const auto& p : cohort)
        out.push_back({p.subject_id, signal::generate_dataset(p, cfg.cohort_per_class, cfg.signal,
                                                              derive_seed(seed, "subject/" + p.subject_id))});
    if (profiles) *profiles = cohort;
    return out;
}

std::string_view to_string(Phase p) {
    switch (p) {
    case Phase::early: return "Early";
    case Phase::mid: return "Mid";
    case Phase::late: return "Late";
    }
    return "?";
}

Phase phase_of(long step, long total_steps) {
    if (total_steps < 1) throw std::invalid_argument("phase_of: total_steps must be >= 1");
    if (step < 0 || step > total_steps) throw std::out_of_range("phase_of: step outside the run");
    const long s = std::max(step - 1, 0L);
    const long idx = std::min(2L, (3 * s) / total_steps);
    return static_cast<Phase>(idx);
}

namespace {

MetricStats stats(const std::vector<double>& v) {
    MetricStats m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(var / static_cast<double>(v.size()));
    return m;
}

}  // namespace

bool covers_all_phases(long total_steps, long eval_interval) {
    std::array<bool, 3> seen{};
    for (long step : eval_steps(total_steps, eval_interval)) seen[static_cast<std::size_t>(phase_of(step, total_steps))] = true;
    return seen[0] && seen[1] && seen[2];
}

std::array<PhaseSummary, 3> aggregate_phases(const std::vector<EvalRecord>& records, long total_steps) {
    std::array<std::vector<const EvalRecord*>, 3> buckets;
    for (const auto& r : records) buckets[static_cast<std::size_t>(phase_of(r.step, total_steps))].push_back(&r);
    std::array<PhaseSummary, 3> out;
    for (std::size_t p = 0; p < 3; ++p) {
        if (buckets[p].empty())
            throw EmptyPhase(std::string("no evaluation records in phase ") +
                             std::string(to_string(static_cast<Phase>(p))));
        std::vector<double> sr, eff, dev, ret;
        for (const auto* r : buckets[p]) {
            sr.push_back(r->success_rate);
            eff.push_back(r->path_efficiency);
            dev.push_back(r->path_deviation);
            ret.push_back(r->mean_return);
        }
        out[p].phase = static_cast<Phase>(p);
        out[p].count = buckets[p].size();
        out[p].success_rate = stats(sr);
        out[p].path_efficiency = stats(eff);
        out[p].path_deviation = stats(dev);
        out[p].mean_return = stats(ret);
    }
    return out;
}

}  // namespace rlihf::harness
