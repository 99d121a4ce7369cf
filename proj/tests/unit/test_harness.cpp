#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "rlihf/config.hpp"
#include "rlihf/reports.hpp"

using namespace rlihf;
using namespace rlihf::harness;
namespace fs = std::filesystem;

namespace {

Config tiny_config() {
    Config c;
    c.experiment.total_steps = 4000;
    c.experiment.eval_interval = 2000;
    c.experiment.episode_len = 100;
    c.experiment.seeds = 1;
    c.experiment.eval_rollouts = 2;
    c.experiment.svg = true;
    c.sac.hidden = {16, 16};
    c.sac.batch_size = 32;
    c.sac.start_steps = 500;
    c.sac.buffer_capacity = 5000;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("rlihf_test_" + name);
    fs::remove_all(d);
    return d;
}

EvalRecord record(long step, double success) {
    EvalRecord r;
    r.step = step;
    r.success_rate = success;
    r.mean_return = success * 10;
    return r;
}

}  // namespace

TEST_CASE("eval schedule") {
    CHECK(eval_steps(4000, 2000) == std::vector<long>{2000, 4000});
    CHECK(eval_steps(5000, 2000) == std::vector<long>{2000, 4000, 5000});
    CHECK(eval_steps(1000, 2000) == std::vector<long>{1000});
}

TEST_CASE("phase bucketing") {
    CHECK(phase_of(1, 90) == Phase::early);
    CHECK(phase_of(30, 90) == Phase::early);
    CHECK(phase_of(31, 90) == Phase::mid);
    CHECK(phase_of(60, 90) == Phase::mid);
    CHECK(phase_of(61, 90) == Phase::late);
    CHECK(phase_of(90, 90) == Phase::late);
    const auto s = aggregate_phases({record(10000, 0), record(30000, 1), record(70000, 0), record(110000, 1)}, 120000);
    CHECK(s[0].count == 2);
    CHECK(s[1].count == 1);
    CHECK(s[2].count == 1);
    CHECK(s[0].success_rate.mean == 0.5);
    CHECK(s[0].success_rate.std == 0.5);
    CHECK(s[1].success_rate.std == 0.0);
    CHECK(s[2].mean_return.mean == 10.0);
    CHECK_THROWS_AS(aggregate_phases({record(10000, 0), record(110000, 1)}, 120000), EmptyPhase);
}

TEST_CASE("run planning") {
    Config c;
    c.experiment.seeds = 3;
    const auto sweep = plan_sweep(c);
    CHECK(sweep.size() == 9);
    CHECK(sweep.front().condition == fusion::Condition::rlihf);
    const auto runs = plan_runs(c);
    CHECK(runs.size() == 9);
    for (const auto& r : runs) {
        if (r.condition != fusion::Condition::rlihf) CHECK(r.w_hf == 0.0);
        CHECK(r.seed == run_seed(c.experiment.master_seed, r.seed_index));
    }
    CHECK(runs[0].label() == "sparse_seed0");
    RunSpec r{fusion::Condition::rlihf, 0.1, 2, 0};
    CHECK(r.label() == "rlihf_w0.1_seed2");
    CHECK(run_seed(0, 0) != run_seed(0, 1));
    CHECK(run_seed(0, 0) != run_seed(1, 0));
}

TEST_CASE("random actions do not solve the default task") {
    const auto s = env::default_scenario();
    env::Environment e(s, std::make_shared<env::IdealPath>(env::compute_ideal_path(s)));
    Rng rng(1);
    int successes = 0;
    for (int k = 0; k < 5; ++k) {
        e.reset(rng);
        env::StepOutcome out;
        do out = e.step({uniform(rng, -1, 1), uniform(rng, -1, 1)});
        while (!out.done);
        successes += out.info.success;
    }
    CHECK(successes == 0);
}

TEST_CASE("evaluation of a motionless policy") {
    Config c = tiny_config();
    const auto s = effective_scenario(c);
    CHECK(s.max_steps == 100);
    auto ideal = std::make_shared<env::IdealPath>(env::compute_ideal_path(s));
    agent::Actor still(s.observation_dim(), 2, {8});
    still.network().parameters().setZero();
    Rng a(3), b(3);
    std::vector<Rollout> rollouts;
    const auto r1 = evaluate(still, s, ideal, 5, a, &rollouts);
    const auto r2 = evaluate(still, s, ideal, 5, b);
    CHECK(r1.rollouts == 5);
    CHECK(r1.successes == 0);
    CHECK(r1.success_rate == 0.0);
    CHECK(r1.path_efficiency == 1.0);  // clamp rule for an idle agent
    CHECK(r1.mean_return == r2.mean_return);
    CHECK(r1.path_deviation == r2.path_deviation);
    REQUIRE(rollouts.size() == 5);
    CHECK(rollouts[0].points.size() == 101);
    double dev_sum = 0.0;
    for (const auto& ro : rollouts) dev_sum += ro.deviation;
    CHECK(r1.path_deviation == doctest::Approx(dev_sum / 5));
}

TEST_CASE("training is deterministic and records every eval point") {
    Config c = tiny_config();
    c.experiment.reward_log = true;
    RunSpec spec{fusion::Condition::rlihf, 0.4, 0, run_seed(0, 0)};
    const auto a = run_training(c, spec);
    const auto b = run_training(c, spec);
    REQUIRE(a.evals.size() == 2);
    CHECK(a.evals[0].step == 2000);
    CHECK(a.evals[1].step == 4000);
    std::ostringstream ea, eb;
    write_eval_csv(ea, a.evals);
    write_eval_csv(eb, b.evals);
    CHECK(ea.str() == eb.str());
    CHECK(a.policy.network().parameters() == b.policy.network().parameters());
    CHECK(a.reward_log.size() == 4000);
    CHECK(a.feedback_events == 4000);
    for (const auto& e : a.evals) CHECK(e.success_rate == static_cast<double>(e.successes) / e.rollouts);
}

TEST_CASE("zero feedback weight reproduces the sparse run") {
    Config c = tiny_config();
    const auto sparse = run_training(c, {fusion::Condition::sparse, 0.0, 0, 11});
    const auto zero = run_training(c, {fusion::Condition::rlihf, 0.0, 0, 11});
    std::ostringstream a, b;
    write_eval_csv(a, sparse.evals);
    write_eval_csv(b, zero.evals);
    CHECK(a.str() == b.str());
}

TEST_CASE("reports") {
    Config c = tiny_config();
    c.experiment.total_steps = 2400;
    c.experiment.eval_interval = 800;
    c.experiment.checkpoints = false;
    const auto runs = run_all(c, plan_runs(c), 1);
    REQUIRE(runs.size() == 3);

    const auto empty_dir = scratch("empty");
    CHECK_THROWS(emit_reports(empty_dir, c, {}, "train"));
    CHECK_FALSE(fs::exists(empty_dir));

    const auto dir = scratch("reports");
    emit_reports(dir, c, runs, "train");
    int evals = 0, summaries = 0, manifests = 0, svgs = 0;
    for (const auto& f : fs::directory_iterator(dir)) {
        const auto name = f.path().filename().string();
        evals += name.rfind("eval_", 0) == 0;
        summaries += name == "summary_phases.csv";
        manifests += name == "manifest.json";
        svgs += name == "returns.svg";
    }
    CHECK(evals == 3);
    CHECK(summaries == 1);
    CHECK(manifests == 1);
    CHECK(svgs == 1);
    std::istringstream summary(slurp(dir / "summary_phases.csv"));
    std::string line;
    std::getline(summary, line);
    CHECK(line == "phase,method,success_rate_mean,success_rate_std,path_eff_mean,path_eff_std,path_dev_mean,path_dev_std");
    int rows = 0;
    while (std::getline(summary, line)) rows += !line.empty();
    CHECK(rows == 9);

    // Manifest round-trip reproduces the outputs.
    const auto again = load_config(dir / "manifest.json");
    CHECK(to_json(again) == to_json(c));
    const auto dir2 = scratch("reports2");
    emit_reports(dir2, again, run_all(again, plan_runs(again), 1), "train");
    for (const auto& f : fs::directory_iterator(dir))
        if (f.path().extension() == ".csv") CHECK(slurp(f.path()) == slurp(dir2 / f.path().filename()));
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("config parsing") {
    const Config d = parse_config(nlohmann::json::object());
    CHECK(to_json(parse_config(to_json(d))) == to_json(d));
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"sac": {"gama": 0.9}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"extra": 1})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"sac": {"gamma": 1.5}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"experiment": {"conditions": ["ppo"]}})")), ConfigError);
    const auto c = parse_config(nlohmann::json::parse(
        R"({"sac": {"auto_alpha": true}, "pipeline": {"oracle": {"accuracy": 0.9}}, "experiment": {"w_hf": 0.7}})"));
    CHECK(c.sac.auto_alpha);
    CHECK(c.pipeline.oracle.accuracy == 0.9);
    CHECK(c.experiment.w_hf == 0.7);
}

TEST_CASE("git blob hash") {
    CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_blob_hash("hello world\n") == "3b18e512dba79e4c8300dd08aeb37f8e728b8dad");
}

TEST_CASE("phase coverage of the eval schedule") {
    CHECK(covers_all_phases(60000, 2000));
    CHECK(covers_all_phases(1200, 400));
    CHECK_FALSE(covers_all_phases(4000, 2000));
    CHECK_FALSE(covers_all_phases(800, 400));
}
