#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rlihf/checkpoint.hpp"
#include "rlihf/config.hpp"
#include "rlihf/epoch_io.hpp"
#include "rlihf/reports.hpp"

namespace fs = std::filesystem;
using namespace rlihf;
using harness::ConfigError;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string condition;
    std::string whf;
    std::optional<long> steps;
    std::optional<int> parallel;
    std::string checkpoint;
    std::string data;
};

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

std::vector<double> parse_weights(const std::string& s) {
    std::vector<double> w;
    for (const auto& p : split(s)) {
        try {
            std::size_t used = 0;
            w.push_back(std::stod(p, &used));
            if (used != p.size()) throw std::invalid_argument(p);
        } catch (const std::exception&) {
            throw ConfigError("--whf: '" + p + "' is not a number");
        }
    }
    if (w.empty()) throw ConfigError("--whf: no weights given");
    return w;
}

harness::Config resolve(const Options& o, bool sweep) {
    harness::Config cfg = o.config.empty() ? harness::parse_config(nlohmann::json::object())
                                           : harness::load_config(o.config);
    auto& ex = cfg.experiment;
    if (o.seed) ex.master_seed = *o.seed;
    if (o.steps) ex.total_steps = *o.steps;
    if (o.parallel) ex.parallel = *o.parallel;
    if (!o.condition.empty()) {
        ex.conditions.clear();
        for (const auto& c : split(o.condition)) {
            try {
                ex.conditions.push_back(fusion::parse_condition(c));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("--condition: ") + e.what());
            }
        }
    }
    if (!o.whf.empty()) {
        const auto w = parse_weights(o.whf);
        if (sweep) ex.sweep_weights = w;
        else if (w.size() != 1) throw ConfigError("--whf takes a single weight outside sweep");
        else ex.w_hf = w.front();
    }
    // Re-validate after overrides.
    return harness::parse_config(harness::to_json(cfg));
}

void print_summary(const std::vector<harness::RunResult>& runs, long total_steps) {
    std::printf("%-8s %-14s %8s %8s %8s %10s\n", "phase", "method", "success", "eff", "dev", "return");
    const auto summaries = harness::summarize(runs, total_steps);
    for (std::size_t p = 0; p < 3; ++p)
        for (const auto& m : summaries) {
            const auto& s = m.phases[p];
            std::printf("%-8s %-14s %8.3f %8.3f %8.3f %10.3f\n", std::string(harness::to_string(s.phase)).c_str(),
                        m.method.c_str(), s.success_rate.mean, s.path_efficiency.mean, s.path_deviation.mean,
                        s.mean_return.mean);
        }
}

int cmd_train(const Options& o, bool sweep) {
    const auto cfg = resolve(o, sweep);
    const auto specs = sweep ? harness::plan_sweep(cfg) : harness::plan_runs(cfg);
    std::fprintf(stderr, "running %zu runs of %ld steps\n", specs.size(), cfg.experiment.total_steps);
    const auto runs = harness::run_all(cfg, specs, cfg.experiment.parallel);
    const auto files = harness::emit_reports(o.out, cfg, runs, sweep ? "sweep" : "train");
    if (harness::covers_all_phases(cfg.experiment.total_steps, cfg.experiment.eval_interval))
        print_summary(runs, cfg.experiment.total_steps);
    else
        std::fprintf(stderr, "eval schedule leaves a phase empty; phase summary skipped\n");
    std::fprintf(stderr, "wrote %zu files to %s\n", files.size(), o.out.c_str());
    return 0;
}

int cmd_eval(const Options& o) {
    const auto cfg = resolve(o, false);
    const agent::Actor policy = agent::load_policy(o.checkpoint);
    const env::Scenario scenario = harness::effective_scenario(cfg);
    if (policy.obs_dim() != scenario.observation_dim())
        throw ConfigError("checkpoint observation size does not match the scenario");
    const auto ideal = std::make_shared<const env::IdealPath>(env::compute_ideal_path(scenario, cfg.planner));
    Rng rng = make_stream(cfg.experiment.master_seed, "eval");
    std::vector<harness::Rollout> rollouts;
    harness::EvalRecord rec = harness::evaluate(policy, scenario, ideal, cfg.experiment.eval_rollouts, rng, &rollouts);
    fs::create_directories(o.out);
    {
        std::ofstream os(fs::path(o.out) / "eval.csv");
        harness::write_eval_csv(os, {rec});
    }
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        std::ofstream os(fs::path(o.out) / ("trajectory_" + std::to_string(i) + ".csv"));
        harness::write_trajectory(os, rollouts[i]);
    }
    std::printf("success_rate %.3f  mean_return %.3f  path_efficiency %.3f  path_deviation %.4f\n", rec.success_rate,
                rec.mean_return, rec.path_efficiency, rec.path_deviation);
    return 0;
}

int cmd_decoder_bench(const Options& o) {
    const auto cfg = resolve(o, false);
    std::vector<decoder::SubjectData> subjects;
    if (!o.data.empty()) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(o.data))
            if (entry.path().extension() == ".errp") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto epochs = signal::read_epochs(f);
            subjects.push_back({f.stem().string(), std::move(epochs)});
        }
    } else {
        subjects = harness::synth_cohort(cfg.pipeline, cfg.experiment.master_seed);
    }
    const auto results = decoder::loso_evaluate(subjects, cfg.pipeline.decoder);
    fs::create_directories(o.out);
    std::ofstream os(fs::path(o.out) / "decoder_bench.csv");
    os << "subject_id,mode,accuracy,tp,fp,tn,fn\n";
    auto row = [&](const std::string& id, const char* mode, const decoder::AccuracyReport& r) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", r.accuracy);
        os << id << ',' << mode << ',' << buf << ',' << r.confusion.tp << ',' << r.confusion.fp << ','
           << r.confusion.tn << ',' << r.confusion.fn << '\n';
        std::printf("%-6s %-9s %.3f\n", id.c_str(), mode, r.accuracy);
    };
    for (const auto& s : results) {
        row(s.subject_id, "loso", s.loso);
        row(s.subject_id, "pretrain", s.pretrain);
        row(s.subject_id, "online", s.online);
    }
    return 0;
}

int cmd_synth(const Options& o) {
    const auto cfg = resolve(o, false);
    const auto subjects = harness::synth_cohort(cfg.pipeline, cfg.experiment.master_seed);
    fs::create_directories(o.out);
    for (const auto& s : subjects) signal::write_epochs(fs::path(o.out) / (s.subject_id + ".errp"), s.epochs);
    std::printf("wrote %zu subject files to %s\n", subjects.size(), o.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Implicit-feedback reinforcement learning testbed"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON config or run manifest");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--parallel", o.parallel, "worker threads");
        sub->add_option("--steps", o.steps, "total training steps");
        sub->add_option("--condition", o.condition, "comma list of sparse,dense,rlihf");
        sub->add_option("--whf", o.whf, "feedback weight (comma list for sweep)");
    };
    auto* train = app.add_subcommand("train", "train every condition x seed and write reports");
    auto* eval = app.add_subcommand("eval", "evaluate a saved policy");
    auto* sweep = app.add_subcommand("sweep", "rlihf runs over several feedback weights");
    auto* bench = app.add_subcommand("decoder-bench", "leave-one-subject-out decoder accuracy");
    auto* synth = app.add_subcommand("synth-data", "write a synthetic epoch cohort");
    for (auto* s : {train, eval, sweep, bench, synth}) common(s);
    eval->add_option("--checkpoint", o.checkpoint, "policy checkpoint")->required();
    bench->add_option("--data", o.data, "directory of .errp files (default: synthesise)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (train->parsed()) return cmd_train(o, false);
        if (sweep->parsed()) return cmd_train(o, true);
        if (eval->parsed()) return cmd_eval(o);
        if (bench->parsed()) return cmd_decoder_bench(o);
        if (synth->parsed()) return cmd_synth(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitRuntime;
}
