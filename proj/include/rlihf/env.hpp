#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rlihf/geometry.hpp"
#include "rlihf/rng.hpp"

namespace rlihf::env {

struct RewardConfig {
    double success = 10.0;
    double collision = -0.5;   // per colliding step
    double k_progress = 1.0;
    double k_deviation = 0.1;
};

/// 2D pick-and-place workspace with circular obstacles. Units are metres.
struct Scenario {
    Rect workspace;
    std::vector<Circle> obstacles;
    Vec2 start{0.1, 0.1};
    Vec2 pick{0.45, 0.2};
    Vec2 place{0.85, 0.85};
    double reach_eps = 0.05;
    double d_safe = 0.08;  // preferred clearance
    double d_err = 0.1;    // tolerated deviation from the ideal path
    int max_steps = 1000;
    double max_speed = 0.05;    // per step, at |action| = 1
    double start_jitter = 0.0;  // half-width of the uniform start box
    RewardConfig rewards;

    void validate() const;
    /// Signed distance to the nearest obstacle surface (negative inside).
    double clearance(const Vec2& p) const;
    bool in_collision(const Vec2& p) const;
    int observation_dim() const { return 7 + 3 * static_cast<int>(obstacles.size()); }
};

/// Four obstacles between start, pick and place; the straight legs pass
/// through two of them.
Scenario default_scenario();

class ScenarioError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// start -> pick -> place polyline. pick_vertex splits the two legs.
struct IdealPath {
    Polyline polyline;
    std::size_t pick_vertex = 0;

    double total_length() const { return polyline.length(); }
    double leg1_length() const { return polyline.arc_at(pick_vertex); }
    double distance(const Vec2& p) const { return polyline.project(p).distance; }
    const std::vector<Vec2>& waypoints() const { return polyline.points(); }
};

struct PlannerConfig {
    double cell = 0.01;
    double clearance_weight = 10.0;  // lambda_c
};

class NoPathError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Clearance-aware A* on an 8-connected grid, then simplification to a polyline.
/// Paths that keep clearance >= d_safe are preferred outright; when none exist
/// the penalised cost length + lambda_c * max(0, d_safe - clearance)^2 decides.
IdealPath compute_ideal_path(const Scenario& scenario, const PlannerConfig& cfg = {});

struct EnvState {
    Vec2 pos = Vec2::Zero();
    bool carrying = false;
    int step = 0;
    bool collided_this_step = false;
    bool success = false;
    bool done = false;
};

struct RewardComponents {
    double sparse = 0.0;
    double dense_shaping = 0.0;
    double unified = 0.0;
};

struct StepInfo {
    bool collision = false;
    bool picked = false;
    bool success = false;
    bool timeout = false;
    double deviation = 0.0;  // distance to the ideal path after the step
    double clearance = 0.0;
};

struct StepOutcome {
    Eigen::VectorXd observation;
    RewardComponents reward;
    bool done = false;
    StepInfo info;
    EnvState before;
    EnvState after;
};

Eigen::VectorXd observe(const Scenario& scenario, const EnvState& state);

/// Stage-aware progress: arc length of the closest point on the first leg
/// while not carrying, on the second leg once carrying.
double progress(const Vec2& pos, bool carrying, const IdealPath& ideal);

double reward_sparse(const StepOutcome& outcome, const RewardConfig& cfg);
/// Sparse terms plus k_p * (progress' - progress) - k_d * dist(pos', ideal).
double reward_dense(const StepOutcome& outcome, const IdealPath& ideal, const RewardConfig& cfg);
/// Evaluation reward shared by every condition; same formula as reward_dense.
double reward_unified_eval(const StepOutcome& outcome, const IdealPath& ideal, const RewardConfig& cfg);

class EpisodeDone : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class Environment {
public:
    Environment(Scenario scenario, std::shared_ptr<const IdealPath> ideal);

    Eigen::VectorXd reset(Rng& rng);
    StepOutcome step(const Eigen::Vector2d& action);

    const EnvState& state() const { return state_; }
    const Scenario& scenario() const { return scenario_; }
    const IdealPath& ideal() const { return *ideal_; }

private:
    Scenario scenario_;
    std::shared_ptr<const IdealPath> ideal_;
    EnvState state_;
};

struct FeedbackEvent {
    bool is_error = false;
};

/// Simulated observer: error iff clearance < d_safe or deviation > d_err (strict).
FeedbackEvent observer_feedback(const EnvState& state, const Scenario& scenario, const IdealPath& ideal);

/// Root mean squared distance of trajectory points to the ideal polyline.
double path_deviation(const std::vector<Vec2>& trajectory, const IdealPath& ideal);

/// ideal length / (executed length + remaining stage-wise distance), clamped to [0, 1].
double path_efficiency(const std::vector<Vec2>& trajectory, const IdealPath& ideal, const EnvState& final_state,
                       const Scenario& scenario);

}  // namespace rlihf::env
