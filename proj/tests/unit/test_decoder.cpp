#include <doctest.h>

#include <cmath>
#include <numbers>

#include "finite_diff.hpp"
#include "rlihf/decoder.hpp"
#include "stats.hpp"

using namespace rlihf;
using namespace rlihf::decoder;
using signal::EEGEpoch;
using signal::SignalConfig;
using signal::SubjectProfile;

namespace {

SubjectProfile subject(double noise, const std::string& id = "s00") {
    SubjectProfile p;
    p.subject_id = id;
    p.noise_std = noise;
    return p;
}

EEGEpoch constant_epoch(int C, int T, double v) {
    EEGEpoch e;
    e.data = Eigen::MatrixXd::Constant(C, T, v);
    return e;
}

// Closed-form average of one Gaussian lobe a*exp(-(t-mu)^2 / 2s^2) over [t0, t1].
double lobe_average(double a, double mu, double s, double t0, double t1) {
    const double k = s * std::sqrt(2.0);
    return a * s * std::sqrt(std::numbers::pi / 2.0) * (std::erf((t1 - mu) / k) - std::erf((t0 - mu) / k)) / (t1 - t0);
}

}  // namespace

TEST_CASE("raw features of trivial epochs") {
    CHECK(raw_features(constant_epoch(3, 64, 0.0), 8).cwiseAbs().maxCoeff() == 0.0);
    const auto f = raw_features(constant_epoch(3, 64, -2.5), 8);
    CHECK(f.size() == 24);
    CHECK((f.array() + 2.5).abs().maxCoeff() < 1e-12);
    CHECK_THROWS(raw_features(constant_epoch(2, 8, 1.0), 9));
}

TEST_CASE("template bin means equal the integral of the lobes") {
    SignalConfig cfg;
    const auto p = subject(0.0);
    EEGEpoch e;
    e.data = signal::erp_template(p, cfg.channels, cfg.epoch_samples(), cfg.sample_rate);
    const int bins = 16;
    const auto f = raw_features(e, bins);
    const auto w = signal::default_spatial_weights(cfg.channels);
    const int T = cfg.epoch_samples();
    const double dt = 1000.0 / cfg.sample_rate;
    double worst = 0.0;
    for (int c = 0; c < cfg.channels; ++c)
        for (int b = 0; b < bins; ++b) {
            // Sample k represents [k - 1/2, k + 1/2) in time (midpoint rule).
            const double t0 = (b * T / bins - 0.5) * dt;
            const double t1 = ((b + 1) * T / bins - 0.5) * dt;
            const double expect =
                w[static_cast<std::size_t>(c)] * (lobe_average(p.n250_amplitude, p.n250_latency_ms, p.n250_width_ms, t0, t1) +
                                                  lobe_average(p.p320_amplitude, p.p320_latency_ms, p.p320_width_ms, t0, t1));
            worst = std::max(worst, std::abs(f[c * bins + b] - expect));
        }
    CHECK(worst < 1e-3);
}

TEST_CASE("softmax") {
    const auto even = softmax(0.0, 0.0);
    CHECK(even.p[0] == 0.5);
    CHECK(even.p[1] == 0.5);
    const auto q = softmax(0.0, std::log(3.0));
    CHECK(q.p[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(q.p[1] == doctest::Approx(0.75).epsilon(1e-14));
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double a = uniform(rng, -800, 800), b = uniform(rng, -800, 800), c = uniform(rng, -50, 50);
        const auto p = softmax(a, b);
        const auto s = softmax(a + c, b + c);
        CHECK(p.p[0] >= 0.0);
        CHECK(p.p[1] <= 1.0);
        CHECK(std::abs(p.p[0] + p.p[1] - 1.0) < 1e-15);
        CHECK(std::abs(p.p[1] - s.p[1]) < 1e-12);
    }
    CHECK_THROWS_AS(softmax(0.0, std::nan("")), std::domain_error);
    CHECK_THROWS_AS(softmax(INFINITY, 0.0), std::domain_error);
}

TEST_CASE("zero network predicts even odds") {
    ErrpClassifier clf(2, 32, 4, 5);
    const auto p = clf.predict(constant_epoch(2, 32, 3.0));
    CHECK(p.p[0] == 0.5);
    CHECK(p.p[1] == 0.5);
    CHECK_THROWS(clf.predict(constant_epoch(3, 32, 0.0)));
}

TEST_CASE("p_errp and decode_reward") {
    CHECK(p_errp({{0.5, 0.5}}) == 0.5);
    CHECK(p_errp({{0.0, 1.0}}) == 1.0);
    CHECK(p_errp({{0.75, 0.25}}) == 0.25);
    CHECK(decode_reward(0.0) == 1.0);
    CHECK(decode_reward(1.0) == 0.0);
    CHECK(decode_reward(0.3) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK_THROWS(decode_reward(-0.01));
    CHECK_THROWS(decode_reward(1.01));
    CHECK_THROWS(decode_reward(std::nan("")));
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) {
        const auto pred = softmax(uniform(rng, -20, 20), uniform(rng, -20, 20));
        CHECK(decode_reward(p_errp(pred)) + pred.p[1] == 1.0);
    }
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(3);
    nn::Mlp net({6, 5, 2}, nn::Activation::tanh);
    net.init_uniform(rng);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 9);
    const std::vector<int> y{0, 1, 1, 0, 1, 0, 0, 1, 1};
    Eigen::VectorXd g;
    cross_entropy_loss(net, x, y, 0.01, &g);
    auto loss = [&] { return cross_entropy_loss(net, x, y, 0.01); };
    CHECK(testing::max_relative_error(net.parameters(), g, loss) < 1e-4);
}

TEST_CASE("a single example is memorised") {
    Rng rng(4);
    nn::Mlp net({5, 8, 2}, nn::Activation::tanh);
    net.init_uniform(rng);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 1);
    TrainConfig cfg;
    cfg.l2_penalty = 0.0;
    cfg.epochs = 500;
    cfg.learning_rate = 1e-2;
    const auto r = fit_network(net, x, {1}, cfg);
    CHECK(r.final_loss < 0.01);
    CHECK(r.final_loss <= r.initial_loss);
}

TEST_CASE("linearly separable features are learned") {
    Rng rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    const int N = 400, D = 10;
    Eigen::VectorXd w = Eigen::VectorXd::Random(D);
    Eigen::MatrixXd x(D, N);
    std::vector<int> y(N);
    for (int i = 0; i < N; ++i) {
        for (int d = 0; d < D; ++d) x(d, i) = n(rng);
        const double s = w.dot(x.col(i));
        y[static_cast<std::size_t>(i)] = s > 0 ? 1 : 0;
        x.col(i) += (s > 0 ? 0.5 : -0.5) * w.normalized();  // margin
    }
    nn::Mlp net({D, 16, 2}, nn::Activation::tanh);
    net.init_uniform(rng);
    TrainConfig cfg;
    const auto r = fit_network(net, x, y, cfg);
    CHECK(r.final_loss <= r.initial_loss);
    const Eigen::MatrixXd logits = net.forward(x);
    int correct = 0;
    for (int i = 0; i < N; ++i) correct += ((logits(1, i) > logits(0, i)) == (y[static_cast<std::size_t>(i)] == 1));
    CHECK(correct >= 0.95 * N);
}

TEST_CASE("training rejects single-class data") {
    SignalConfig cfg;
    auto data = signal::generate_dataset(subject(2.0), 5, cfg, 1);
    for (auto& e : data) e.label = true;
    CHECK_THROWS_AS(train(data, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("shuffled labels give chance accuracy on held-out data") {
    SignalConfig cfg;
    auto train_set = signal::generate_dataset(subject(4.0), 150, cfg, 21);
    const auto test_set = signal::generate_dataset(subject(4.0), 250, cfg, 22);
    Rng rng(6);
    std::vector<bool> labels;
    for (const auto& e : train_set) labels.push_back(*e.label);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < train_set.size(); ++i) train_set[i].label = labels[i];
    const auto clf = train(train_set, TrainConfig{});
    const double acc = evaluate_accuracy(clf, test_set).accuracy;
    CHECK(acc >= 0.4);
    CHECK(acc <= 0.6);
}

TEST_CASE("high-SNR subject is decoded accurately") {
    SignalConfig cfg;
    TrainReport report;
    const auto clf = train(signal::generate_dataset(subject(2.0), 150, cfg, 31), TrainConfig{}, &report);
    CHECK(report.final_loss <= report.initial_loss);
    CHECK(evaluate_accuracy(clf, signal::generate_dataset(subject(2.0), 150, cfg, 32)).accuracy >= 0.85);
}

TEST_CASE("evaluate_accuracy counts") {
    SignalConfig cfg;
    const auto data = signal::generate_dataset(subject(1.0), 10, cfg, 41);
    const auto perfect = evaluate_accuracy(
        [](const EEGEpoch& e) { return *e.label ? Prediction{{0.1, 0.9}} : Prediction{{0.9, 0.1}}; }, data);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.confusion.fp == 0);
    CHECK(perfect.confusion.fn == 0);
    CHECK(perfect.confusion.tp == 10);
    const auto constant = evaluate_accuracy([](const EEGEpoch&) { return Prediction{{0.9, 0.1}}; }, data);
    CHECK(constant.accuracy == 0.5);
    CHECK(constant.confusion.tn == 10);
    CHECK(constant.confusion.fn == 10);
}

TEST_CASE("oracle channel hits the configured accuracy") {
    for (double a : {0.5, 0.8, 1.0}) {
        OracleChannelConfig cfg{a, 2.0};
        Rng rng(static_cast<std::uint64_t>(a * 100));
        int match = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            const bool label = i % 2 == 0;
            const auto p = oracle_decode(label, cfg, rng);
            CHECK(std::abs(p.p[0] + p.p[1] - 1.0) < 1e-15);
            match += (p.argmax() == 1) == label;
        }
        const double rate = static_cast<double>(match) / n;
        if (a == 1.0) CHECK(match == n);
        CHECK(rate >= a - 0.02);
        CHECK(rate <= a + 0.02);
    }
}

TEST_CASE("oracle confidence follows the Beta(k, 1) shape") {
    for (double k : {1.0, 2.0, 5.0}) {
        OracleChannelConfig cfg{1.0, k};
        Rng rng(7);
        double sum = 0.0, below = 0.0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double c = oracle_decode(false, cfg, rng).p[0];
            CHECK(c > 0.5);
            CHECK(c <= 1.0);
            sum += c;
            below += c < 0.75 ? 1.0 : 0.0;
        }
        // (c - 0.5) / 0.5 ~ Beta(k, 1): mean k / (k + 1), CDF x^k.
        CHECK(sum / n == doctest::Approx(0.5 + 0.5 * k / (k + 1.0)).epsilon(0.01));
        CHECK(below / n == doctest::Approx(std::pow(0.5, k)).epsilon(0.05));
    }
    const OracleChannelConfig low_accuracy{0.4, 2.0};
    const OracleChannelConfig no_concentration{0.8, 0.0};
    CHECK_THROWS(low_accuracy.validate());
    CHECK_THROWS(no_concentration.validate());
}

TEST_CASE("loso needs two subjects") {
    SignalConfig cfg;
    std::vector<SubjectData> one{{"s01", signal::generate_dataset(subject(2.0), 5, cfg, 1)}};
    CHECK_THROWS(loso_evaluate(one, TrainConfig{}));
}

TEST_CASE("identical subjects: loso matches within-subject accuracy") {
    SignalConfig cfg;
    const auto a = signal::generate_dataset(subject(12.0, "a"), 150, cfg, 51);
    const auto b = signal::generate_dataset(subject(12.0, "b"), 150, cfg, 52);
    const auto res = loso_evaluate({{"a", a}, {"b", b}}, TrainConfig{});
    const auto own = train(signal::generate_dataset(subject(12.0, "a"), 150, cfg, 53), TrainConfig{});
    const double within = evaluate_accuracy(own, a).accuracy;
    CHECK(res[0].subject_id == "a");
    CHECK(std::abs(res[0].loso.accuracy - within) <= 0.05);
    CHECK(res[0].online.confusion.total() == 90);
    CHECK(res[0].pretrain.confusion.total() == 90);
}

TEST_CASE("a subject buried in noise decodes at chance") {
    SignalConfig cfg;
    std::vector<SubjectData> subjects{{"clean1", signal::generate_dataset(subject(2.0, "clean1"), 100, cfg, 61)},
                                      {"clean2", signal::generate_dataset(subject(2.0, "clean2"), 100, cfg, 62)},
                                      {"noisy", signal::generate_dataset(subject(5000.0, "noisy"), 200, cfg, 63)}};
    const auto res = loso_evaluate(subjects, TrainConfig{});
    CHECK(res[2].loso.accuracy == doctest::Approx(0.5).epsilon(0.15));
    CHECK(res[0].loso.accuracy < 0.99 + 0.01);
}

TEST_CASE("decoder accuracy falls with subject noise") {
    SignalConfig cfg;
    Rng rng(8);
    const auto cohort = signal::make_cohort(6, 2.0, 40.0, cfg.channels, rng);
    std::vector<SubjectData> subjects;
    std::vector<double> noise, acc;
    for (std::size_t i = 0; i < cohort.size(); ++i)
        subjects.push_back({cohort[i].subject_id, signal::generate_dataset(cohort[i], 80, cfg, 70 + i)});
    const auto res = loso_evaluate(subjects, TrainConfig{});
    for (std::size_t i = 0; i < res.size(); ++i) {
        noise.push_back(cohort[i].noise_std);
        acc.push_back(res[i].loso.accuracy);
    }
    CHECK(testing::spearman(noise, acc) <= 0.0);
}
