#include "rlihf/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rlihf::decoder {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("decoder: learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("decoder: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("decoder: batch_size must be >= 1");
    if (l2_penalty < 0.0) throw std::invalid_argument("decoder: l2_penalty must be >= 0");
    if (hidden < 1 || bins < 1) throw std::invalid_argument("decoder: hidden and bins must be >= 1");
}

Prediction softmax(double logit0, double logit1) {
    if (!std::isfinite(logit0) || !std::isfinite(logit1))
        throw std::domain_error("softmax: non-finite logits");
    const double m = std::max(logit0, logit1);
    const double e0 = std::exp(logit0 - m);
    const double e1 = std::exp(logit1 - m);
    const double z = e0 + e1;
    return {{e0 / z, e1 / z}};
}

double p_errp(const Prediction& prediction) { return prediction.p[1]; }

double decode_reward(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("decode_reward: p_ErrP outside [0, 1]");
    return 1.0 - p;
}

Eigen::VectorXd raw_features(const EEGEpoch& epoch, int bins) {
    const auto C = epoch.data.rows();
    const auto T = epoch.data.cols();
    if (bins < 1 || bins > T) throw std::invalid_argument("feature bins must be in [1, T]");
    Eigen::VectorXd f(C * bins);
    for (Eigen::Index c = 0; c < C; ++c) {
        for (int b = 0; b < bins; ++b) {
            const Eigen::Index lo = b * T / bins;
            const Eigen::Index hi = (b + 1) * T / bins;
            f[c * bins + b] = epoch.data.row(c).segment(lo, hi - lo).mean();
        }
    }
    return f;
}

ErrpClassifier::ErrpClassifier(int channels, int samples, int bins, int hidden)
    : channels_(channels),
      samples_(samples),
      bins_(bins),
      net_({channels * bins, hidden, 2}, nn::Activation::tanh),
      stats_{Eigen::VectorXd::Zero(channels * bins), Eigen::VectorXd::Ones(channels * bins)} {}

Eigen::VectorXd ErrpClassifier::features(const EEGEpoch& epoch) const {
    if (epoch.data.rows() != channels_ || epoch.data.cols() != samples_)
        throw std::invalid_argument("epoch is " + std::to_string(epoch.data.rows()) + "x" +
                                    std::to_string(epoch.data.cols()) + ", classifier expects " +
                                    std::to_string(channels_) + "x" + std::to_string(samples_));
    return ((raw_features(epoch, bins_) - stats_.mean).array() / stats_.scale.array()).matrix();
}

Prediction ErrpClassifier::predict_features(const Eigen::VectorXd& standardized) const {
    const Eigen::MatrixXd logits = net_.forward(standardized);
    return softmax(logits(0, 0), logits(1, 0));
}

Prediction ErrpClassifier::predict(const EEGEpoch& epoch) const { return predict_features(features(epoch)); }

double cross_entropy_loss(const nn::Mlp& net, const Eigen::MatrixXd& features, const std::vector<int>& labels,
                          double l2_penalty, Eigen::VectorXd* grad) {
    const auto n = features.cols();
    if (n == 0 || static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("cross entropy: feature/label count mismatch");
    nn::MlpCache cache;
    const Eigen::MatrixXd logits = net.forward(features, cache);
    Eigen::MatrixXd dlogits(2, n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = std::max(logits(0, i), logits(1, i));
        const double lse = m + std::log(std::exp(logits(0, i) - m) + std::exp(logits(1, i) - m));
        const int y = labels[static_cast<std::size_t>(i)];
        loss += lse - logits(y, i);
        for (int k = 0; k < 2; ++k) dlogits(k, i) = (std::exp(logits(k, i) - lse) - (k == y ? 1.0 : 0.0)) / n;
    }
    loss /= static_cast<double>(n);
    loss += 0.5 * l2_penalty * net.parameters().squaredNorm();
    if (grad) *grad = net.backward(cache, dlogits) + l2_penalty * net.parameters();
    return loss;
}

TrainReport fit_network(nn::Mlp& net, const Eigen::MatrixXd& features, const std::vector<int>& labels,
                        const TrainConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(features.cols());
    TrainReport report;
    report.initial_loss = cross_entropy_loss(net, features, labels, cfg.l2_penalty);

    Rng rng(derive_seed(cfg.rng_seed, "decoder-batches"));
    nn::Adam adam(net.parameter_count(), cfg.learning_rate);
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Eigen::MatrixXd xb(features.rows(), static_cast<Eigen::Index>(batch));
    std::vector<int> yb(batch);
    Eigen::VectorXd grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start + batch <= n; start += batch) {
            for (std::size_t j = 0; j < batch; ++j) {
                xb.col(static_cast<Eigen::Index>(j)) = features.col(static_cast<Eigen::Index>(order[start + j]));
                yb[j] = labels[order[start + j]];
            }
            cross_entropy_loss(net, xb, yb, cfg.l2_penalty, &grad);
            adam.step(net.parameters(), grad);
        }
    }
    report.final_loss = cross_entropy_loss(net, features, labels, cfg.l2_penalty);
    return report;
}

ErrpClassifier train(const std::vector<EEGEpoch>& dataset, const TrainConfig& cfg, TrainReport* report) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("decoder train: empty dataset");
    long errors = 0;
    for (const auto& e : dataset) {
        if (!e.label) throw std::invalid_argument("decoder train: unlabelled epoch");
        errors += *e.label ? 1 : 0;
    }
    if (errors == 0 || errors == static_cast<long>(dataset.size()))
        throw std::invalid_argument("decoder train: dataset must contain both labels");

    const auto& first = dataset.front().data;
    ErrpClassifier clf(static_cast<int>(first.rows()), static_cast<int>(first.cols()), cfg.bins, cfg.hidden);
    const auto n = static_cast<Eigen::Index>(dataset.size());
    Eigen::MatrixXd raw(first.rows() * cfg.bins, n);
    std::vector<int> labels(dataset.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = dataset[static_cast<std::size_t>(i)];
        if (e.data.rows() != first.rows() || e.data.cols() != first.cols())
            throw std::invalid_argument("decoder train: epochs differ in dimensions");
        raw.col(i) = raw_features(e, cfg.bins);
        labels[static_cast<std::size_t>(i)] = *e.label ? 1 : 0;
    }
    auto& stats = clf.stats();
    stats.mean = raw.rowwise().mean();
    const Eigen::MatrixXd centred = raw.colwise() - stats.mean;
    stats.scale = (centred.array().square().rowwise().sum() / static_cast<double>(n)).sqrt().max(1e-6).matrix();
    const Eigen::MatrixXd x = (centred.array().colwise() / stats.scale.array()).matrix();

    Rng init(derive_seed(cfg.rng_seed, "decoder-init"));
    clf.network().init_uniform(init);
    const auto r = fit_network(clf.network(), x, labels, cfg);
    if (report) *report = r;
    return clf;
}

void OracleChannelConfig::validate() const {
    if (!(accuracy >= 0.5 && accuracy <= 1.0)) throw std::invalid_argument("oracle accuracy must be in [0.5, 1]");
    if (!(confidence_concentration > 0.0) || !std::isfinite(confidence_concentration))
        throw std::invalid_argument("oracle confidence_concentration must be positive");
}

Prediction oracle_decode(bool is_error, const OracleChannelConfig& cfg, Rng& rng) {
    const bool correct = uniform01(rng) < cfg.accuracy;
    const bool says_error = correct ? is_error : !is_error;
    // U in (0, 1] keeps the winner strictly above 0.5.
    const double u = 1.0 - uniform01(rng);
    const double confidence = 0.5 + 0.5 * std::pow(u, 1.0 / cfg.confidence_concentration);
    return says_error ? Prediction{{1.0 - confidence, confidence}} : Prediction{{confidence, 1.0 - confidence}};
}

AccuracyReport evaluate_accuracy(const Predictor& predictor, const std::vector<EEGEpoch>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("evaluate_accuracy: empty dataset");
    AccuracyReport r;
    for (const auto& e : dataset) {
        if (!e.label) throw std::invalid_argument("evaluate_accuracy: unlabelled epoch");
        const bool said_error = predictor(e).argmax() == 1;
        if (*e.label) (said_error ? r.confusion.tp : r.confusion.fn)++;
        else (said_error ? r.confusion.fp : r.confusion.tn)++;
    }
    r.accuracy = static_cast<double>(r.confusion.tp + r.confusion.tn) / static_cast<double>(r.confusion.total());
    return r;
}

AccuracyReport evaluate_accuracy(const ErrpClassifier& classifier, const std::vector<EEGEpoch>& dataset) {
    return evaluate_accuracy([&](const EEGEpoch& e) { return classifier.predict(e); }, dataset);
}

namespace {

std::size_t head_size(std::size_t n, double holdout_fraction) {
    const auto tail = static_cast<std::size_t>(std::ceil(holdout_fraction * static_cast<double>(n)));
    return n - std::min(tail, n);
}

// Writes the epochs back-to-back into a ring buffer and pulls each one out
// again at its replay onset, as the closed loop would receive it.
std::vector<EEGEpoch> replay(const std::vector<EEGEpoch>& epochs) {
    if (epochs.empty()) return {};
    const int C = static_cast<int>(epochs.front().data.rows());
    const int T = static_cast<int>(epochs.front().data.cols());
    signal::RingBuffer ring(C, 2 * static_cast<std::int64_t>(T));
    std::vector<EEGEpoch> out;
    for (const auto& e : epochs) {
        const std::int64_t onset = ring.write_head();
        for (int k = 0; k < T; ++k) ring.write({onset + k, e.data.col(k)});
        EEGEpoch r = ring.extract_epoch(onset, T);
        r.label = e.label;
        r.subject_id = e.subject_id;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::vector<SubjectAccuracy> loso_evaluate(const std::vector<SubjectData>& subjects, const TrainConfig& cfg,
                                           double holdout_fraction) {
    if (subjects.size() < 2) throw std::invalid_argument("LOSO needs at least two subjects");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw std::invalid_argument("holdout_fraction must be in (0, 1)");

    std::vector<EEGEpoch> pooled_head;
    for (const auto& s : subjects) {
        if (s.epochs.empty()) throw std::invalid_argument("subject " + s.subject_id + " has no epochs");
        const auto h = head_size(s.epochs.size(), holdout_fraction);
        pooled_head.insert(pooled_head.end(), s.epochs.begin(), s.epochs.begin() + static_cast<long>(h));
    }
    const ErrpClassifier pooled = train(pooled_head, cfg);

    std::vector<SubjectAccuracy> out;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        std::vector<EEGEpoch> others;
        for (std::size_t j = 0; j < subjects.size(); ++j)
            if (j != i) others.insert(others.end(), subjects[j].epochs.begin(), subjects[j].epochs.end());
        const ErrpClassifier held_out = train(others, cfg);

        const auto& mine = subjects[i].epochs;
        const std::vector<EEGEpoch> tail(mine.begin() + static_cast<long>(head_size(mine.size(), holdout_fraction)),
                                         mine.end());
        SubjectAccuracy acc;
        acc.subject_id = subjects[i].subject_id;
        acc.loso = evaluate_accuracy(held_out, mine);
        acc.pretrain = evaluate_accuracy(pooled, tail);
        acc.online = evaluate_accuracy(held_out, replay(tail));
        out.push_back(std::move(acc));
    }
    return out;
}

}  // namespace rlihf::decoder
