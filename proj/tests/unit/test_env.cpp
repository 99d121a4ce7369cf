#include <doctest.h>

#include <cmath>

#include "rlihf/env.hpp"

using namespace rlihf;
using namespace rlihf::env;

namespace {

Scenario empty_scenario() {
    Scenario s;
    s.start = {0.1, 0.5};
    s.pick = {0.5, 0.5};
    s.place = {0.9, 0.5};
    return s;
}

// start -> pick -> place as a hand-built polyline.
std::shared_ptr<IdealPath> straight_ideal(const Scenario& s) {
    auto p = std::make_shared<IdealPath>();
    p->polyline = Polyline({s.start, s.pick, s.place});
    p->pick_vertex = 1;
    return p;
}

// Brute-force distance: sample every segment at n points.
double sampled_distance(const Vec2& p, const std::vector<Vec2>& line, int n) {
    double best = INFINITY;
    for (std::size_t s = 0; s + 1 < line.size(); ++s)
        for (int k = 0; k <= n; ++k) {
            const Vec2 q = line[s] + (line[s + 1] - line[s]) * (static_cast<double>(k) / n);
            best = std::min(best, (p - q).norm());
        }
    return best;
}

// Action heading straight at `to`, scaled so no component exceeds 1.
Eigen::Vector2d toward(const Vec2& from, const Vec2& to, double speed) {
    const Eigen::Vector2d a = (to - from) / speed;
    const double m = a.cwiseAbs().maxCoeff();
    return m > 1.0 ? Eigen::Vector2d(a / m) : a;
}

}  // namespace

TEST_CASE("reset") {
    const auto s = default_scenario();
    auto ideal = std::make_shared<IdealPath>(compute_ideal_path(s));
    Environment env(s, ideal);
    Rng a(5), b(5);
    const auto o1 = env.reset(a);
    const auto o2 = env.reset(b);
    CHECK(o1 == o2);
    CHECK(o1.size() == 19);
    CHECK(env.state().step == 0);
    CHECK_FALSE(env.state().carrying);
    CHECK((env.state().pos - s.start).cwiseAbs().maxCoeff() <= s.start_jitter);

    auto bad = s;
    bad.start = bad.obstacles[0].centre;
    CHECK_THROWS_AS(bad.validate(), ScenarioError);
    CHECK_THROWS_AS(Environment(bad, ideal), ScenarioError);
}

TEST_CASE("observation layout") {
    auto s = empty_scenario();
    s.obstacles = {{{0.3, 0.8}, 0.1}};
    EnvState st;
    st.pos = {0.3, 0.5};
    st.carrying = true;
    const auto o = observe(s, st);
    REQUIRE(o.size() == 10);
    CHECK(o[0] == 0.3);
    CHECK(o[2] == doctest::Approx(0.2));
    CHECK(o[5] == 0.0);
    CHECK(o[6] == 1.0);
    CHECK(o[8] == doctest::Approx(0.3));
    CHECK(o[9] == doctest::Approx(0.2));
}

TEST_CASE("step kinematics") {
    auto s = empty_scenario();
    s.obstacles = {{{0.3, 0.5}, 0.04}};
    s.start = {0.2, 0.5};
    auto ideal = straight_ideal(s);
    Environment env(s, ideal);
    Rng rng(1);
    env.reset(rng);

    SUBCASE("zero action") {
        const auto out = env.step({0.0, 0.0});
        CHECK(out.after.pos == s.start);
        CHECK(out.after.step == 1);
        CHECK_FALSE(out.info.collision);
        CHECK(out.reward.sparse == 0.0);
    }
    SUBCASE("actions are clamped") {
        const auto out = env.step({-7.0, 0.0});
        CHECK(out.after.pos.x() == doctest::Approx(0.2 - s.max_speed));
    }
    SUBCASE("moving into an obstacle rolls back") {
        env.step({1.0, 0.0});  // 0.25: clear
        const auto out = env.step({1.0, 0.0});  // 0.30: obstacle centre
        CHECK(out.info.collision);
        CHECK(out.after.collided_this_step);
        CHECK(out.after.pos.x() == doctest::Approx(0.25));
        CHECK(out.reward.sparse == -0.5);
        CHECK_FALSE(out.done);
    }
    SUBCASE("workspace clamp") {
        for (int i = 0; i < 10; ++i) env.step({0.0, 1.0});
        CHECK(env.state().pos.y() == 1.0);
    }
}

TEST_CASE("pick, place and termination") {
    auto s = empty_scenario();
    s.start = {0.46, 0.5};
    s.max_steps = 50;
    Environment env(s, straight_ideal(s));
    Rng rng(1);
    env.reset(rng);
    auto out = env.step({0.0, 0.0});
    CHECK(out.info.picked);
    CHECK(out.after.carrying);
    int steps = 1;
    while (!out.done) {
        out = env.step(toward(env.state().pos, s.place, s.max_speed));
        ++steps;
    }
    CHECK(out.info.success);
    CHECK_FALSE(out.info.timeout);
    CHECK(out.after.carrying);
    CHECK((out.after.pos - s.place).norm() <= s.reach_eps);
    CHECK(out.reward.sparse == 10.0);
    CHECK(steps < 50);
    CHECK_THROWS_AS(env.step({0.0, 0.0}), EpisodeDone);
}

TEST_CASE("timeout without carrying") {
    auto s = empty_scenario();
    s.max_steps = 3;
    Environment env(s, straight_ideal(s));
    Rng rng(1);
    env.reset(rng);
    env.step({0.0, 1.0});
    env.step({0.0, 1.0});
    const auto out = env.step({0.0, 1.0});
    CHECK(out.done);
    CHECK(out.info.timeout);
    CHECK_FALSE(out.info.success);
}

TEST_CASE("dense reward terms") {
    auto s = empty_scenario();
    Environment env(s, straight_ideal(s));
    Rng rng(1);
    const auto& rw = s.rewards;

    SUBCASE("stationary off path") {
        const auto ideal = straight_ideal(s);
        s.start = {0.2, 0.6};
        Environment off(s, ideal);
        off.reset(rng);
        const auto out = off.step({0.0, 0.0});
        CHECK(out.reward.dense_shaping == doctest::Approx(-rw.k_deviation * 0.1).epsilon(1e-12));
        CHECK(reward_dense(out, off.ideal(), rw) == out.reward.unified);
        CHECK(reward_unified_eval(out, off.ideal(), rw) == reward_dense(out, off.ideal(), rw));
    }
    SUBCASE("one step along the path") {
        env.reset(rng);
        const auto out = env.step({1.0, 0.0});
        CHECK(out.reward.dense_shaping == doctest::Approx(rw.k_progress * s.max_speed).epsilon(1e-12));
        CHECK(out.reward.sparse == 0.0);
    }
}

TEST_CASE("progress telescopes over a full traversal") {
    const auto s = [] {
        auto d = default_scenario();
        d.start_jitter = 0.0;
        return d;
    }();
    auto ideal = std::make_shared<IdealPath>(compute_ideal_path(s));
    Environment env(s, ideal);
    Rng rng(1);
    env.reset(rng);
    double shaping = 0.0, deviation = 0.0;
    const auto& pts = ideal->waypoints();
    std::size_t target = 1;
    StepOutcome out;
    do {
        while (target + 1 < pts.size() && (env.state().pos - pts[target]).norm() < 1e-12) ++target;
        out = env.step(toward(env.state().pos, pts[target], s.max_speed));
        shaping += out.reward.dense_shaping;
        deviation += out.info.deviation;
    } while (!out.done);
    REQUIRE(out.info.success);
    CHECK(deviation < 1e-9);
    const double travelled = progress(out.after.pos, true, *ideal);
    CHECK(shaping == doctest::Approx(s.rewards.k_progress * travelled).epsilon(1e-10));
    CHECK(std::abs(travelled - ideal->total_length()) <= s.reach_eps);
}

TEST_CASE("closed loop shaping sums to the deviation penalty") {
    auto s = empty_scenario();
    s.start = {0.2, 0.4};
    Environment env(s, straight_ideal(s));
    Rng rng(1);
    env.reset(rng);
    const std::vector<Eigen::Vector2d> moves{{1, 0}, {0, 1}, {0, 1}, {0.5, 1}, {-1, 0}, {-0.5, -1}, {0, -1}, {0, -1}};
    double shaping = 0.0, dev = 0.0;
    for (const auto& a : moves) {
        const auto out = env.step(a);
        shaping += out.reward.dense_shaping;
        dev += out.info.deviation;
    }
    REQUIRE((env.state().pos - s.start).norm() < 1e-12);
    CHECK(shaping == doctest::Approx(-s.rewards.k_deviation * dev).epsilon(1e-12));
}

TEST_CASE("random walk stays legal") {
    const auto s = default_scenario();
    Environment env(s, std::make_shared<IdealPath>(compute_ideal_path(s)));
    Rng rng(9);
    env.reset(rng);
    for (int i = 0; i < 3000; ++i) {
        if (env.state().done) env.reset(rng);
        const auto out = env.step({uniform(rng, -1, 1), uniform(rng, -1, 1)});
        CHECK(s.workspace.contains(out.after.pos));
        CHECK_FALSE(s.in_collision(out.after.pos));
        if (out.info.success) CHECK(out.before.carrying);
    }
}

TEST_CASE("observer feedback") {
    auto s = empty_scenario();
    s.obstacles = {{{0.5, 0.0}, 0.25}};
    s.d_err = 0.25;
    s.d_safe = 0.125;
    const auto ideal = straight_ideal(s);
    EnvState st;
    st.pos = {0.3, 0.5};
    CHECK_FALSE(observer_feedback(st, s, *ideal).is_error);
    st.pos = {0.3, 0.75};  // deviation exactly d_err
    CHECK_FALSE(observer_feedback(st, s, *ideal).is_error);
    st.pos = {0.3, 0.7501};
    CHECK(observer_feedback(st, s, *ideal).is_error);
    st.pos = {0.5, 0.3};  // clearance 0.05 < d_safe, on path deviation 0.2
    CHECK(observer_feedback(st, s, *ideal).is_error);
    st.pos = {0.5, 0.375};  // clearance exactly d_safe
    CHECK_FALSE(observer_feedback(st, s, *ideal).is_error);
    st.carrying = true;  // pure function of position
    CHECK_FALSE(observer_feedback(st, s, *ideal).is_error);
}

TEST_CASE("path deviation") {
    const auto s = empty_scenario();
    const auto ideal = straight_ideal(s);
    CHECK(path_deviation({{0.2, 0.5}, {0.5, 0.5}, {0.8, 0.5}}, *ideal) == 0.0);
    IdealPath wide;
    wide.polyline = Polyline({{0.0, 0.0}, {10.0, 0.0}});
    CHECK(path_deviation({{1.0, 1.0}, {2.0, -1.0}, {9.0, 1.0}}, wide) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS(path_deviation({}, *ideal));

    Rng rng(3);
    const std::vector<Vec2> line{{0.1, 0.2}, {0.7, 0.3}, {0.5, 0.9}, {0.95, 0.6}};
    IdealPath three;
    three.polyline = Polyline(line);
    std::vector<Vec2> traj;
    double acc = 0.0;
    for (int i = 0; i < 10; ++i) {
        traj.emplace_back(uniform(rng, 0, 1), uniform(rng, 0, 1));
        const double d = sampled_distance(traj.back(), line, 3334);
        acc += d * d;
    }
    CHECK(std::abs(path_deviation(traj, three) - std::sqrt(acc / 10.0)) < 1e-3);

    const Vec2 shift(3.5, -2.25);
    std::vector<Vec2> moved_line, moved_traj;
    for (const auto& p : line) moved_line.push_back(p + shift);
    for (const auto& p : traj) moved_traj.push_back(p + shift);
    IdealPath moved;
    moved.polyline = Polyline(moved_line);
    CHECK(path_deviation(moved_traj, moved) == doctest::Approx(path_deviation(traj, three)).epsilon(1e-12));
}

TEST_CASE("path efficiency") {
    const auto s = empty_scenario();
    const auto ideal = straight_ideal(s);
    EnvState done;
    done.success = true;
    done.carrying = true;
    done.pos = s.place;
    CHECK(path_efficiency({s.start, s.pick, s.place}, *ideal, done, s) == doctest::Approx(1.0));
    // Detour doubles the executed length.
    CHECK(path_efficiency({s.start, {0.1, 0.9}, s.start, s.pick, s.place}, *ideal, done, s) ==
          doctest::Approx(0.5).epsilon(1e-12));
    EnvState idle;
    idle.pos = s.start;
    CHECK(path_efficiency({s.start}, *ideal, idle, s) == 1.0);
    EnvState half;
    half.carrying = true;
    half.pos = {0.7, 0.5};
    CHECK(path_efficiency({s.start, {0.7, 0.5}}, *ideal, half, s) == doctest::Approx(0.8 / 0.8));
    CHECK_THROWS(path_efficiency({}, *ideal, idle, s));
}
