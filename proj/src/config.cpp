#include "rlihf/config.hpp"

#include <fstream>
#include <set>
#include <string>

namespace rlihf::harness {
namespace {

using nlohmann::json;

// Reads known keys from one JSON object and rejects anything else.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    void vec2(const char* key, env::Vec2& out) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError(where(key) + ": expected [x, y]");
        out = env::Vec2(v[0].get<double>(), v[1].get<double>());
    }

    const json* child(const char* key) {
        known_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& item : j_.items())
            if (!known_.count(item.key())) throw ConfigError("unknown key '" + where(item.key()) + "'");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> known_;
};

void read_rewards(const json& j, env::RewardConfig& r) {
    Section s(j, "scenario.rewards");
    s.get("success", r.success);
    s.get("collision", r.collision);
    s.get("k_progress", r.k_progress);
    s.get("k_deviation", r.k_deviation);
    s.finish();
}

void read_scenario(const json& j, env::Scenario& sc, env::PlannerConfig& planner) {
    Section s(j, "scenario");
    if (const json* w = s.child("workspace")) {
        if (!w->is_array() || w->size() != 4) throw ConfigError("scenario.workspace: expected [xmin, ymin, xmax, ymax]");
        try {
            sc.workspace.lo = env::Vec2((*w)[0].get<double>(), (*w)[1].get<double>());
            sc.workspace.hi = env::Vec2((*w)[2].get<double>(), (*w)[3].get<double>());
        } catch (const json::exception& e) {
            throw ConfigError(std::string("scenario.workspace: ") + e.what());
        }
    }
    if (const json* obs = s.child("obstacles")) {
        if (!obs->is_array()) throw ConfigError("scenario.obstacles: expected an array");
        sc.obstacles.clear();
        for (std::size_t i = 0; i < obs->size(); ++i) {
            Section o((*obs)[i], "scenario.obstacles[" + std::to_string(i) + "]");
            double cx = 0, cy = 0, r = 0;
            o.get("cx", cx);
            o.get("cy", cy);
            o.get("r", r);
            o.finish();
            if (!(*obs)[i].contains("cx") || !(*obs)[i].contains("cy") || !(*obs)[i].contains("r"))
                throw ConfigError("scenario.obstacles[" + std::to_string(i) + "]: needs cx, cy and r");
            sc.obstacles.push_back({env::Vec2(cx, cy), r});
        }
    }
    s.vec2("start", sc.start);
    s.vec2("pick", sc.pick);
    s.vec2("place", sc.place);
    s.get("reach_eps", sc.reach_eps);
    s.get("d_safe", sc.d_safe);
    s.get("d_err", sc.d_err);
    s.get("max_steps", sc.max_steps);
    s.get("max_speed", sc.max_speed);
    s.get("start_jitter", sc.start_jitter);
    if (const json* r = s.child("rewards")) read_rewards(*r, sc.rewards);
    if (const json* p = s.child("planner")) {
        Section ps(*p, "scenario.planner");
        ps.get("cell", planner.cell);
        ps.get("clearance_weight", planner.clearance_weight);
        ps.finish();
    }
    s.finish();
}

void read_sac(const json& j, agent::SacConfig& c) {
    Section s(j, "sac");
    s.get("gamma", c.gamma);
    s.get("tau", c.tau);
    s.get("actor_lr", c.actor_lr);
    s.get("critic_lr", c.critic_lr);
    s.get("alpha_lr", c.alpha_lr);
    s.get("batch_size", c.batch_size);
    s.get("alpha", c.alpha);
    s.get("auto_alpha", c.auto_alpha);
    if (const json* te = s.child("target_entropy")) {
        if (te->is_null()) c.target_entropy.reset();
        else if (te->is_number()) c.target_entropy = te->get<double>();
        else throw ConfigError("sac.target_entropy: expected a number or null");
    }
    s.get("start_steps", c.start_steps);
    s.get("update_every", c.update_every);
    s.get("buffer_capacity", c.buffer_capacity);
    s.get("hidden", c.hidden);
    s.finish();
}

void read_subject(const json& j, signal::SubjectProfile& p) {
    Section s(j, "pipeline.subject");
    s.get("subject_id", p.subject_id);
    s.get("n250_amplitude", p.n250_amplitude);
    s.get("p320_amplitude", p.p320_amplitude);
    s.get("n250_latency_ms", p.n250_latency_ms);
    s.get("p320_latency_ms", p.p320_latency_ms);
    s.get("n250_width_ms", p.n250_width_ms);
    s.get("p320_width_ms", p.p320_width_ms);
    s.get("latency_jitter_ms", p.latency_jitter_ms);
    s.get("noise_std", p.noise_std);
    s.get("spatial_weights", p.spatial_weights);
    s.finish();
}

void read_signal(const json& j, signal::SignalConfig& c) {
    Section s(j, "pipeline.signal");
    s.get("channels", c.channels);
    s.get("sample_rate", c.sample_rate);
    s.get("epoch_seconds", c.epoch_seconds);
    s.get("low_hz", c.low_hz);
    s.get("high_hz", c.high_hz);
    s.get("filter_taps", c.filter_taps);
    s.get("ring_capacity", c.ring_capacity);
    s.finish();
}

void read_decoder(const json& j, decoder::TrainConfig& c) {
    Section s(j, "pipeline.decoder");
    s.get("learning_rate", c.learning_rate);
    s.get("epochs", c.epochs);
    s.get("batch_size", c.batch_size);
    s.get("l2_penalty", c.l2_penalty);
    s.get("rng_seed", c.rng_seed);
    s.get("hidden", c.hidden);
    s.get("bins", c.bins);
    s.finish();
}

void read_pipeline(const json& j, fusion::PipelineConfig& c) {
    Section s(j, "pipeline");
    std::string mode(fusion::to_string(c.mode));
    s.get("mode", mode);
    try {
        c.mode = fusion::parse_mode(mode);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("pipeline.mode: ") + e.what());
    }
    s.get("cadence", c.cadence);
    s.get("baseline_centering", c.baseline_centering);
    if (const json* o = s.child("oracle")) {
        Section os(*o, "pipeline.oracle");
        os.get("accuracy", c.oracle.accuracy);
        os.get("confidence_concentration", c.oracle.confidence_concentration);
        os.finish();
    }
    if (const json* p = s.child("subject")) read_subject(*p, c.subject);
    if (const json* p = s.child("signal")) read_signal(*p, c.signal);
    if (const json* p = s.child("decoder")) read_decoder(*p, c.decoder);
    s.get("lag_samples", c.lag_samples);
    s.get("calibration_per_class", c.calibration_per_class);
    if (const json* p = s.child("cohort")) {
        Section cs(*p, "pipeline.cohort");
        cs.get("subjects", c.cohort_subjects);
        cs.get("noise_min", c.cohort_noise_min);
        cs.get("noise_max", c.cohort_noise_max);
        cs.get("per_class", c.cohort_per_class);
        cs.finish();
    }
    s.finish();
}

void read_experiment(const json& j, ExperimentConfig& c) {
    Section s(j, "experiment");
    if (const json* conds = s.child("conditions")) {
        if (!conds->is_array()) throw ConfigError("experiment.conditions: expected an array of names");
        c.conditions.clear();
        for (const auto& v : *conds) {
            if (!v.is_string()) throw ConfigError("experiment.conditions: expected strings");
            try {
                c.conditions.push_back(fusion::parse_condition(v.get<std::string>()));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("experiment.conditions: ") + e.what());
            }
        }
    }
    s.get("w_hf", c.w_hf);
    s.get("sweep_weights", c.sweep_weights);
    s.get("total_steps", c.total_steps);
    s.get("episode_len", c.episode_len);
    s.get("eval_interval", c.eval_interval);
    s.get("eval_rollouts", c.eval_rollouts);
    s.get("seeds", c.seeds);
    s.get("master_seed", c.master_seed);
    s.get("parallel", c.parallel);
    s.get("reward_log", c.reward_log);
    s.get("checkpoints", c.checkpoints);
    s.get("svg", c.svg);
    s.finish();
}

json vec2(const env::Vec2& v) { return json::array({v.x(), v.y()}); }

}  // namespace

Config parse_config(const json& j) {
    Config cfg;
    Section root(j, "");
    if (const json* s = root.child("scenario")) read_scenario(*s, cfg.scenario, cfg.planner);
    if (const json* s = root.child("sac")) read_sac(*s, cfg.sac);
    if (const json* s = root.child("pipeline")) read_pipeline(*s, cfg.pipeline);
    if (const json* s = root.child("experiment")) read_experiment(*s, cfg.experiment);
    root.finish();
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const env::NoPathError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (j.is_object() && j.contains("manifest_version")) {
        if (!j.contains("config")) throw ConfigError(path.string() + ": manifest has no config");
        return parse_config(j.at("config"));
    }
    return parse_config(j);
}

json to_json(const Config& cfg) {
    const auto& sc = cfg.scenario;
    json obstacles = json::array();
    for (const auto& o : sc.obstacles) obstacles.push_back({{"cx", o.centre.x()}, {"cy", o.centre.y()}, {"r", o.radius}});
    json scenario = {
        {"workspace", {sc.workspace.lo.x(), sc.workspace.lo.y(), sc.workspace.hi.x(), sc.workspace.hi.y()}},
        {"obstacles", obstacles},
        {"start", vec2(sc.start)},
        {"pick", vec2(sc.pick)},
        {"place", vec2(sc.place)},
        {"reach_eps", sc.reach_eps},
        {"d_safe", sc.d_safe},
        {"d_err", sc.d_err},
        {"max_steps", sc.max_steps},
        {"max_speed", sc.max_speed},
        {"start_jitter", sc.start_jitter},
        {"rewards",
         {{"success", sc.rewards.success},
          {"collision", sc.rewards.collision},
          {"k_progress", sc.rewards.k_progress},
          {"k_deviation", sc.rewards.k_deviation}}},
        {"planner", {{"cell", cfg.planner.cell}, {"clearance_weight", cfg.planner.clearance_weight}}},
    };
    const auto& s = cfg.sac;
    json sac = {
        {"gamma", s.gamma},
        {"tau", s.tau},
        {"actor_lr", s.actor_lr},
        {"critic_lr", s.critic_lr},
        {"alpha_lr", s.alpha_lr},
        {"batch_size", s.batch_size},
        {"alpha", s.alpha},
        {"auto_alpha", s.auto_alpha},
        {"target_entropy", s.target_entropy ? json(*s.target_entropy) : json(nullptr)},
        {"start_steps", s.start_steps},
        {"update_every", s.update_every},
        {"buffer_capacity", s.buffer_capacity},
        {"hidden", s.hidden},
    };
    const auto& p = cfg.pipeline;
    const auto& sub = p.subject;
    json pipeline = {
        {"mode", std::string(fusion::to_string(p.mode))},
        {"cadence", p.cadence},
        {"baseline_centering", p.baseline_centering},
        {"oracle", {{"accuracy", p.oracle.accuracy}, {"confidence_concentration", p.oracle.confidence_concentration}}},
        {"subject",
         {{"subject_id", sub.subject_id},
          {"n250_amplitude", sub.n250_amplitude},
          {"p320_amplitude", sub.p320_amplitude},
          {"n250_latency_ms", sub.n250_latency_ms},
          {"p320_latency_ms", sub.p320_latency_ms},
          {"n250_width_ms", sub.n250_width_ms},
          {"p320_width_ms", sub.p320_width_ms},
          {"latency_jitter_ms", sub.latency_jitter_ms},
          {"noise_std", sub.noise_std},
          {"spatial_weights", sub.spatial_weights}}},
        {"signal",
         {{"channels", p.signal.channels},
          {"sample_rate", p.signal.sample_rate},
          {"epoch_seconds", p.signal.epoch_seconds},
          {"low_hz", p.signal.low_hz},
          {"high_hz", p.signal.high_hz},
          {"filter_taps", p.signal.filter_taps},
          {"ring_capacity", p.signal.ring_capacity}}},
        {"decoder",
         {{"learning_rate", p.decoder.learning_rate},
          {"epochs", p.decoder.epochs},
          {"batch_size", p.decoder.batch_size},
          {"l2_penalty", p.decoder.l2_penalty},
          {"rng_seed", p.decoder.rng_seed},
          {"hidden", p.decoder.hidden},
          {"bins", p.decoder.bins}}},
        {"lag_samples", p.lag_samples},
        {"calibration_per_class", p.calibration_per_class},
        {"cohort",
         {{"subjects", p.cohort_subjects},
          {"noise_min", p.cohort_noise_min},
          {"noise_max", p.cohort_noise_max},
          {"per_class", p.cohort_per_class}}},
    };
    const auto& e = cfg.experiment;
    json conditions = json::array();
    for (auto c : e.conditions) conditions.push_back(std::string(fusion::to_string(c)));
    json experiment = {
        {"conditions", conditions},
        {"w_hf", e.w_hf},
        {"sweep_weights", e.sweep_weights},
        {"total_steps", e.total_steps},
        {"episode_len", e.episode_len},
        {"eval_interval", e.eval_interval},
        {"eval_rollouts", e.eval_rollouts},
        {"seeds", e.seeds},
        {"master_seed", e.master_seed},
        {"parallel", e.parallel},
        {"reward_log", e.reward_log},
        {"checkpoints", e.checkpoints},
        {"svg", e.svg},
    };
    return {{"scenario", scenario}, {"sac", sac}, {"pipeline", pipeline}, {"experiment", experiment}};
}

}  // namespace rlihf::harness
