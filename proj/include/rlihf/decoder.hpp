#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rlihf/nn.hpp"
#include "rlihf/rng.hpp"
#include "rlihf/signal.hpp"

namespace rlihf::decoder {

using signal::EEGEpoch;

/// Class distribution: p[0] non-error, p[1] error.
struct Prediction {
    std::array<double, 2> p{0.5, 0.5};
    int argmax() const { return p[1] > p[0] ? 1 : 0; }
};

struct TrainConfig {
    double learning_rate = 2e-3;
    int epochs = 40;
    int batch_size = 32;
    double l2_penalty = 1e-3;
    std::uint64_t rng_seed = 7;
    int hidden = 32;
    int bins = 16;

    void validate() const;
};

/// Numerically stable softmax over two logits. Non-finite logits are an error.
Prediction softmax(double logit0, double logit1);

/// Error probability, p[1].
double p_errp(const Prediction& prediction);
/// Implicit reward 1 - p_ErrP; p must lie in [0, 1].
double decode_reward(double p_errp);

/// Mean amplitude of each channel over `bins` equal-width temporal bins,
/// channel-major (feature index = channel * bins + bin).
Eigen::VectorXd raw_features(const EEGEpoch& epoch, int bins);

struct FeatureStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  // standard deviation, floored
};

/// Binned-mean features + standardisation + 2-layer perceptron
/// (C*B -> hidden, tanh -> 2 logits). Immutable once trained.
class ErrpClassifier {
public:
    ErrpClassifier() = default;
    ErrpClassifier(int channels, int samples, int bins, int hidden);

    Eigen::VectorXd features(const EEGEpoch& epoch) const;
    Prediction predict_features(const Eigen::VectorXd& standardized) const;
    Prediction predict(const EEGEpoch& epoch) const;

    int channels() const { return channels_; }
    int samples() const { return samples_; }
    int bins() const { return bins_; }
    nn::Mlp& network() { return net_; }
    const nn::Mlp& network() const { return net_; }
    FeatureStats& stats() { return stats_; }
    const FeatureStats& stats() const { return stats_; }

private:
    int channels_ = 0, samples_ = 0, bins_ = 0;
    nn::Mlp net_;
    FeatureStats stats_;
};

/// Mean cross-entropy of the network over feature columns X with labels
/// (1 = error), plus 0.5 * l2 * ||theta||^2. Fills grad when non-null.
double cross_entropy_loss(const nn::Mlp& net, const Eigen::MatrixXd& features,
                          const std::vector<int>& labels, double l2_penalty,
                          Eigen::VectorXd* grad = nullptr);

struct TrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Mini-batch gradient descent (Adam) on standardised features. No class checks;
/// the batch size is clipped to the sample count.
TrainReport fit_network(nn::Mlp& net, const Eigen::MatrixXd& features, const std::vector<int>& labels,
                        const TrainConfig& cfg);

/// Trains a classifier on labelled epochs. Rejects single-class datasets.
ErrpClassifier train(const std::vector<EEGEpoch>& dataset, const TrainConfig& cfg,
                     TrainReport* report = nullptr);

struct OracleChannelConfig {
    double accuracy = 0.8;
    double confidence_concentration = 2.0;

    void validate() const;
};

/// Synthetic decoder: argmax matches the true label with probability
/// `accuracy`; the winning-class probability is 0.5 + 0.5 * U^(1/k),
/// i.e. Beta(k, 1)-shaped with mean 0.5 + 0.5 k / (k + 1).
Prediction oracle_decode(bool is_error, const OracleChannelConfig& cfg, Rng& rng);

/// Positive class = error.
struct Confusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

struct AccuracyReport {
    double accuracy = 0.0;
    Confusion confusion;
};

using Predictor = std::function<Prediction(const EEGEpoch&)>;

AccuracyReport evaluate_accuracy(const Predictor& predictor, const std::vector<EEGEpoch>& dataset);
AccuracyReport evaluate_accuracy(const ErrpClassifier& classifier, const std::vector<EEGEpoch>& dataset);

struct SubjectData {
    std::string subject_id;
    std::vector<EEGEpoch> epochs;  // recording order
};

struct SubjectAccuracy {
    std::string subject_id;
    AccuracyReport loso;      // trained on all other subjects, tested on every epoch of this one
    AccuracyReport pretrain;  // pooled model (leading share of every subject), this subject's tail
    AccuracyReport online;    // LOSO model on this subject's tail, replayed through a ring buffer
};

/// Leave-one-subject-out evaluation. holdout_fraction is the tail share of
/// each subject's recording used for the pretrain/online splits.
std::vector<SubjectAccuracy> loso_evaluate(const std::vector<SubjectData>& subjects, const TrainConfig& cfg,
                                           double holdout_fraction = 0.3);

}  // namespace rlihf::decoder
