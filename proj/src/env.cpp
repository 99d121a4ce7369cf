#include "rlihf/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rlihf::env {

void Scenario::validate() const {
    if (!(workspace.hi.x() > workspace.lo.x() && workspace.hi.y() > workspace.lo.y()))
        throw ScenarioError("scenario: workspace must have positive extent");
    for (const auto& o : obstacles)
        if (!(o.radius > 0.0)) throw ScenarioError("scenario: obstacle radius must be positive");
    auto check_point = [&](const Vec2& p, const char* name) {
        if (!workspace.contains(p)) throw ScenarioError(std::string("scenario: ") + name + " outside workspace");
        if (in_collision(p)) throw ScenarioError(std::string("scenario: ") + name + " inside an obstacle");
    };
    check_point(start, "start");
    check_point(pick, "pick");
    check_point(place, "place");
    if (!(d_safe > 0.0)) throw ScenarioError("scenario: d_safe must be > 0");
    if (!(d_err > 0.0)) throw ScenarioError("scenario: d_err must be > 0");
    if (!(reach_eps > 0.0)) throw ScenarioError("scenario: reach_eps must be > 0");
    if (max_steps < 1) throw ScenarioError("scenario: max_steps must be >= 1");
    if (!(max_speed > 0.0)) throw ScenarioError("scenario: max_speed must be > 0");
    if (start_jitter < 0.0) throw ScenarioError("scenario: start_jitter must be >= 0");
    if (start_jitter > 0.0) {
        for (double dx : {-start_jitter, start_jitter})
            for (double dy : {-start_jitter, start_jitter})
                check_point(start + Vec2(dx, dy), "start jitter box corner");
    }
}

double Scenario::clearance(const Vec2& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles) best = std::min(best, (p - o.centre).norm() - o.radius);
    return best;
}

bool Scenario::in_collision(const Vec2& p) const {
    for (const auto& o : obstacles)
        if ((p - o.centre).norm() < o.radius) return true;
    return false;
}

Scenario default_scenario() {
    Scenario s;
    s.obstacles = {
        {{0.27, 0.12}, 0.05},
        {{0.62, 0.46}, 0.07},
        {{0.86, 0.52}, 0.06},
        {{0.36, 0.68}, 0.06},
    };
    s.start_jitter = 0.02;
    return s;
}

Eigen::VectorXd observe(const Scenario& scenario, const EnvState& state) {
    Eigen::VectorXd o(scenario.observation_dim());
    o.segment<2>(0) = state.pos;
    o.segment<2>(2) = scenario.pick - state.pos;
    o.segment<2>(4) = scenario.place - state.pos;
    o[6] = state.carrying ? 1.0 : 0.0;
    Eigen::Index k = 7;
    for (const auto& ob : scenario.obstacles) {
        const Vec2 d = ob.centre - state.pos;
        o.segment<2>(k) = d;
        o[k + 2] = d.norm() - ob.radius;
        k += 3;
    }
    return o;
}

double progress(const Vec2& pos, bool carrying, const IdealPath& ideal) {
    const auto& line = ideal.polyline;
    if (carrying) return line.project(pos, ideal.pick_vertex, line.segment_count()).arc_length;
    return line.project(pos, 0, ideal.pick_vertex).arc_length;
}

double reward_sparse(const StepOutcome& outcome, const RewardConfig& cfg) {
    double r = 0.0;
    if (outcome.info.success) r += cfg.success;
    if (outcome.info.collision) r += cfg.collision;
    return r;
}

namespace {

double shaping(const StepOutcome& outcome, const IdealPath& ideal, const RewardConfig& cfg) {
    const double dp = progress(outcome.after.pos, outcome.after.carrying, ideal) -
                      progress(outcome.before.pos, outcome.before.carrying, ideal);
    return cfg.k_progress * dp - cfg.k_deviation * ideal.distance(outcome.after.pos);
}

}  // namespace

double reward_dense(const StepOutcome& outcome, const IdealPath& ideal, const RewardConfig& cfg) {
    return reward_sparse(outcome, cfg) + shaping(outcome, ideal, cfg);
}

double reward_unified_eval(const StepOutcome& outcome, const IdealPath& ideal, const RewardConfig& cfg) {
    return reward_dense(outcome, ideal, cfg);
}

Environment::Environment(Scenario scenario, std::shared_ptr<const IdealPath> ideal)
    : scenario_(std::move(scenario)), ideal_(std::move(ideal)) {
    scenario_.validate();
    if (!ideal_) throw std::invalid_argument("environment needs an ideal path");
}

Eigen::VectorXd Environment::reset(Rng& rng) {
    state_ = EnvState{};
    state_.pos = scenario_.start;
    if (scenario_.start_jitter > 0.0) {
        const double j = scenario_.start_jitter;
        state_.pos += Vec2(uniform(rng, -j, j), uniform(rng, -j, j));
    }
    return observe(scenario_, state_);
}

StepOutcome Environment::step(const Eigen::Vector2d& action) {
    if (state_.done) throw EpisodeDone("step() on a finished episode; call reset()");
    if (!action.allFinite()) throw std::invalid_argument("non-finite action");

    StepOutcome out;
    out.before = state_;
    EnvState next = state_;
    next.collided_this_step = false;
    const Vec2 proposed = scenario_.workspace.clamp(state_.pos + scenario_.max_speed * action.cwiseMax(-1.0).cwiseMin(1.0));
    if (scenario_.in_collision(proposed)) {
        next.collided_this_step = true;  // rolled back
    } else {
        next.pos = proposed;
    }
    if (!next.carrying && (next.pos - scenario_.pick).norm() <= scenario_.reach_eps) {
        next.carrying = true;
        out.info.picked = true;
    }
    if (next.carrying && (next.pos - scenario_.place).norm() <= scenario_.reach_eps) next.success = true;
    ++next.step;
    const bool timeout = !next.success && next.step >= scenario_.max_steps;
    next.done = next.success || timeout;
    state_ = next;

    out.after = state_;
    out.done = state_.done;
    out.info.collision = state_.collided_this_step;
    out.info.success = state_.success;
    out.info.timeout = timeout;
    out.info.deviation = ideal_->distance(state_.pos);
    out.info.clearance = scenario_.clearance(state_.pos);
    out.observation = observe(scenario_, state_);
    out.reward.sparse = reward_sparse(out, scenario_.rewards);
    out.reward.dense_shaping = shaping(out, *ideal_, scenario_.rewards);
    out.reward.unified = out.reward.sparse + out.reward.dense_shaping;
    return out;
}

FeedbackEvent observer_feedback(const EnvState& state, const Scenario& scenario, const IdealPath& ideal) {
    const bool too_close = scenario.clearance(state.pos) < scenario.d_safe;
    const bool off_path = ideal.distance(state.pos) > scenario.d_err;
    return {too_close || off_path};
}

double path_deviation(const std::vector<Vec2>& trajectory, const IdealPath& ideal) {
    if (trajectory.empty()) throw std::invalid_argument("path_deviation: empty trajectory");
    double acc = 0.0;
    for (const auto& p : trajectory) {
        const double d = ideal.distance(p);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(trajectory.size()));
}

double path_efficiency(const std::vector<Vec2>& trajectory, const IdealPath& ideal, const EnvState& final_state,
                       const Scenario& scenario) {
    if (trajectory.empty()) throw std::invalid_argument("path_efficiency: empty trajectory");
    double executed = 0.0;
    for (std::size_t i = 1; i < trajectory.size(); ++i) executed += (trajectory[i] - trajectory[i - 1]).norm();
    const Vec2& pos = final_state.pos;
    double remaining = 0.0;
    if (!final_state.success) {
        remaining = final_state.carrying ? (pos - scenario.place).norm()
                                         : (pos - scenario.pick).norm() + (scenario.pick - scenario.place).norm();
    }
    const double denom = executed + remaining;
    if (denom <= 0.0) return 1.0;
    return std::clamp(ideal.total_length() / denom, 0.0, 1.0);
}

}  // namespace rlihf::env
