#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rlihf/fusion.hpp"

using namespace rlihf;
using namespace rlihf::fusion;

namespace {

struct World {
    env::Scenario scenario;
    env::IdealPath ideal;
    World() {
        scenario.start = {0.1, 0.5};
        scenario.pick = {0.5, 0.5};
        scenario.place = {0.9, 0.5};
        scenario.obstacles = {{{0.5, 0.2}, 0.1}};
        ideal.polyline = env::Polyline({scenario.start, scenario.pick, scenario.place});
        ideal.pick_vertex = 1;
    }
    env::EnvState at(double x, double y) const {
        env::EnvState s;
        s.pos = {x, y};
        return s;
    }
};

PipelineConfig oracle(double accuracy) {
    PipelineConfig c;
    c.oracle.accuracy = accuracy;
    return c;
}

}  // namespace

TEST_CASE("compose") {
    CHECK(compose(1.5, 0.9, 0.0, true) == 1.5);
    CHECK(compose(1.5, 0.9, 0.0, false) == 1.5);
    CHECK(compose(0.0, 0.7, 0.4, false) == doctest::Approx(0.28).epsilon(1e-15));
    CHECK(compose(-0.5, 0.5, 0.7, true) == -0.5);
    CHECK(compose(0.0, 0.9, 0.5, true) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK_THROWS(compose(0.0, 1.2, 0.1, true));
    CHECK_THROWS(compose(0.0, 0.5, -0.1, true));
}

TEST_CASE("names") {
    for (auto c : {Condition::sparse, Condition::dense, Condition::rlihf}) CHECK(parse_condition(to_string(c)) == c);
    CHECK_THROWS(parse_condition("ppo"));
    CHECK(parse_mode("decoded") == FeedbackMode::decoded);
    CHECK_THROWS(parse_mode("telepathy"));
}

TEST_CASE("perfect oracle points the right way") {
    World w;
    FeedbackPipeline p(oracle(1.0), 1);
    const auto good = p.feedback(w.at(0.3, 0.5), w.scenario, w.ideal, 0.0, 0.1);
    CHECK_FALSE(good.label);
    REQUIRE(good.r_hf.has_value());
    CHECK(*good.r_hf > 0.5);
    CHECK(good.r_hf_centered > 0.0);
    CHECK(good.total > 0.0);
    const auto close = p.feedback(w.at(0.5, 0.35), w.scenario, w.ideal, 0.0, 0.1);  // clearance 0.05
    CHECK(close.label);
    CHECK(*close.r_hf < 0.5);
    CHECK(close.r_hf_centered < 0.0);
    CHECK(close.p_errp == doctest::Approx(1.0 - *close.r_hf));
    CHECK(p.online_accuracy() == 1.0);
}

TEST_CASE("chance oracle adds nothing on average") {
    World w;
    FeedbackPipeline p(oracle(0.5), 2);
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto r = p.feedback(w.at(0.3, i % 2 ? 0.5 : 0.8), w.scenario, w.ideal, 0.0, 1.0);
        sum += r.r_hf_centered;
    }
    CHECK(std::abs(sum / n) < 0.02);
}

TEST_CASE("feedback separation grows with oracle accuracy") {
    World w;
    double previous = -INFINITY;
    for (double acc : {0.6, 0.8, 1.0}) {
        FeedbackPipeline p(oracle(acc), 3);
        double good = 0.0, bad = 0.0;
        for (int i = 0; i < 4000; ++i) {
            good += *p.feedback(w.at(0.3, 0.5), w.scenario, w.ideal, 0.0, 0.1).r_hf;
            bad += *p.feedback(w.at(0.3, 0.8), w.scenario, w.ideal, 0.0, 0.1).r_hf;
        }
        const double gap = (good - bad) / 4000.0;
        CHECK(gap > previous);
        previous = gap;
    }
}

TEST_CASE("cadence averages events") {
    World w;
    auto cfg = oracle(1.0);
    cfg.cadence = 4;
    FeedbackPipeline p(cfg, 4);
    const auto r = p.feedback(w.at(0.3, 0.5), w.scenario, w.ideal, 0.0, 0.1);
    CHECK(p.events() == 4);
    CHECK(r.skipped_events == 0);
    CHECK(*r.r_hf > 0.5);
}

TEST_CASE("decoded feedback from a noiseless subject") {
    PipelineConfig cfg;
    cfg.mode = FeedbackMode::decoded;
    cfg.subject.noise_std = 0.0;
    cfg.calibration_per_class = 40;
    const auto clf = calibrate_decoder(cfg, 5);
    FeedbackPipeline p(cfg, 6, clf);
    int match = 0;
    for (int i = 0; i < 1000; ++i) {
        const bool err = i % 3 == 0;
        match += p.event(err).predicted == (err ? 1 : 0);
    }
    CHECK(match >= 990);
    CHECK(p.online_accuracy() >= 0.99);
    CHECK_THROWS(FeedbackPipeline(cfg, 7, nullptr));
}

TEST_CASE("late epochs are skipped and stay neutral") {
    World w;
    PipelineConfig cfg;
    cfg.mode = FeedbackMode::decoded;
    cfg.subject.noise_std = 0.0;
    cfg.calibration_per_class = 20;
    cfg.lag_samples = 64;
    auto clf = calibrate_decoder(cfg, 8);
    FeedbackPipeline p(cfg, 9, clf);
    const auto r = p.feedback(w.at(0.3, 0.5), w.scenario, w.ideal, 2.0, 0.7);
    CHECK(r.skipped_events == 1);
    CHECK(*r.r_hf == 0.5);
    CHECK(r.total == 2.0);
    CHECK(p.skipped() == 1);
}

TEST_CASE("condition rewards") {
    World w;
    auto s = w.scenario;
    s.start = {0.2, 0.6};
    auto ideal = std::make_shared<env::IdealPath>(w.ideal);
    env::Environment e(s, ideal);
    Rng rng(10);
    e.reset(rng);
    const auto out = e.step({1.0, 0.0});

    const auto sparse = condition_reward(Condition::sparse, out, s, *ideal, nullptr, 0.0);
    CHECK(sparse.total == out.reward.sparse);
    CHECK_FALSE(sparse.r_hf.has_value());
    const auto dense = condition_reward(Condition::dense, out, s, *ideal, nullptr, 0.5);
    CHECK(dense.total == out.reward.sparse + out.reward.dense_shaping);
    CHECK_FALSE(dense.r_hf.has_value());

    FeedbackPipeline p(oracle(0.8), 11);
    const auto zero = condition_reward(Condition::rlihf, out, s, *ideal, &p, 0.0);
    CHECK(zero.total == sparse.total);
    const auto weighted = condition_reward(Condition::rlihf, out, s, *ideal, &p, 0.4);
    REQUIRE(weighted.r_hf.has_value());
    CHECK(weighted.total == doctest::Approx(out.reward.sparse + 0.4 * (*weighted.r_hf - 0.5)).epsilon(1e-14));
    CHECK(weighted.r_env == out.reward.sparse);
    CHECK_THROWS(condition_reward(Condition::rlihf, out, s, *ideal, nullptr, 0.4));
}

TEST_CASE("reward log format") {
    std::vector<RewardLogRow> rows(2);
    rows[0].step = 1;
    rows[0].reward.r_env = -0.5;
    rows[0].reward.total = -0.5;
    rows[1].step = 2;
    rows[1].condition = Condition::rlihf;
    rows[1].w_hf = 0.1;
    rows[1].reward.r_hf = 0.75;
    rows[1].reward.p_errp = 0.25;
    rows[1].reward.total = 0.025;
    std::ostringstream os;
    write_reward_log(os, rows);
    std::istringstream is(os.str());
    std::string header, first, second;
    std::getline(is, header);
    std::getline(is, first);
    std::getline(is, second);
    CHECK(header == "step,condition,r_env,r_hf,w_hf,total,label,p_errp");
    CHECK(first.rfind("1,sparse,-0.5,,", 0) == 0);
    CHECK(second.rfind("2,rlihf,0,0.75,0.1,0.025,0,0.25", 0) == 0);
}

TEST_CASE("pipeline config validation") {
    PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    c.cadence = 0;
    CHECK_THROWS(c.validate());
    c = PipelineConfig{};
    c.cohort_noise_min = 0.0;
    CHECK_THROWS(c.validate());
}
