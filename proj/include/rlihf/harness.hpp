#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rlihf/env.hpp"
#include "rlihf/fusion.hpp"
#include "rlihf/sac.hpp"

namespace rlihf::harness {

struct ExperimentConfig {
    std::vector<fusion::Condition> conditions{fusion::Condition::sparse, fusion::Condition::dense,
                                              fusion::Condition::rlihf};
    double w_hf = 0.1;
    std::vector<double> sweep_weights{0.1, 0.4, 0.7};
    long total_steps = 60000;
    int episode_len = 1000;
    long eval_interval = 2000;
    int eval_rollouts = 5;
    int seeds = 5;
    std::uint64_t master_seed = 0;
    int parallel = 1;
    bool reward_log = false;
    bool checkpoints = true;
    bool svg = true;

    void validate() const;
};

/// Everything a run needs; the resolved form is what manifests record.
struct Config {
    env::Scenario scenario = env::default_scenario();
    env::PlannerConfig planner;
    agent::SacConfig sac;
    fusion::PipelineConfig pipeline;
    ExperimentConfig experiment;

    void validate() const;
};

struct EvalRecord {
    long step = 0;
    double mean_return = 0.0;
    double return_std = 0.0;
    double success_rate = 0.0;
    double path_efficiency = 0.0;
    double path_deviation = 0.0;
    int successes = 0;
    int rollouts = 0;
};

struct TrajectoryPoint {
    int step = 0;
    env::Vec2 pos;
    bool carrying = false;
    bool collision = false;
    double deviation = 0.0;
};

struct Rollout {
    std::vector<TrajectoryPoint> points;  // includes the reset state at step 0
    double ret = 0.0;
    bool success = false;
    double efficiency = 0.0;
    double deviation = 0.0;
};

/// n deterministic rollouts scored with the unified evaluation reward.
/// Start jitter is drawn from `rng`.
EvalRecord evaluate(const agent::Actor& policy, const env::Scenario& scenario,
                    std::shared_ptr<const env::IdealPath> ideal, int n, Rng& rng,
                    std::vector<Rollout>* rollouts = nullptr);

/// One (condition, weight, seed) cell of an experiment.
struct RunSpec {
    fusion::Condition condition = fusion::Condition::sparse;
    double w_hf = 0.0;
    int seed_index = 0;
    std::uint64_t seed = 0;
    std::string label() const;  // file stem, e.g. rlihf_w0.1_seed2
};

struct RunResult {
    RunSpec spec;
    std::vector<EvalRecord> evals;
    std::vector<fusion::RewardLogRow> reward_log;
    agent::Actor policy;
    long episodes = 0;
    long feedback_events = 0;
    double online_accuracy = 0.0;
};

/// Run seed for the k-th seed of an experiment.
std::uint64_t run_seed(std::uint64_t master_seed, int seed_index);

/// Steps at which evaluation happens: every multiple of eval_interval, plus the last step.
std::vector<long> eval_steps(long total_steps, long eval_interval);

/// Scenario with max_steps taken from experiment.episode_len.
env::Scenario effective_scenario(const Config& cfg);

RunResult run_training(const Config& cfg, const RunSpec& spec,
                       std::shared_ptr<const env::IdealPath> ideal = nullptr,
                       std::shared_ptr<const decoder::ErrpClassifier> classifier = nullptr);

/// experiment.conditions x seeds at experiment.w_hf (weight only matters for rlihf).
std::vector<RunSpec> plan_runs(const Config& cfg);
/// rlihf at each sweep weight x seeds.
std::vector<RunSpec> plan_sweep(const Config& cfg);

/// Executes runs on up to `parallel` worker threads; results keep the order of `specs`.
std::vector<RunResult> run_all(const Config& cfg, const std::vector<RunSpec>& specs, int parallel);

enum class Phase { early, mid, late };
std::string_view to_string(Phase p);

/// Thirds of total_steps: (0, T/3] early, (T/3, 2T/3] mid, (2T/3, T] late.
Phase phase_of(long step, long total_steps);

struct MetricStats {
    double mean = 0.0;
    double std = 0.0;  // population
};

struct PhaseSummary {
    Phase phase = Phase::early;
    std::size_t count = 0;
    MetricStats success_rate, path_efficiency, path_deviation, mean_return;
};

class EmptyPhase : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Synthetic cohort from the pipeline's cohort settings, one balanced recording per subject.
std::vector<decoder::SubjectData> synth_cohort(const fusion::PipelineConfig& cfg, std::uint64_t seed,
                                               std::vector<signal::SubjectProfile>* profiles = nullptr);

/// True when the eval schedule puts at least one record in every phase.
bool covers_all_phases(long total_steps, long eval_interval);

/// Pools records (any number of seeds) by phase. Throws EmptyPhase if a phase has no record.
std::array<PhaseSummary, 3> aggregate_phases(const std::vector<EvalRecord>& records, long total_steps);

}  // namespace rlihf::harness
