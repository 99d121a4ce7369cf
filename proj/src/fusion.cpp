#include "rlihf/fusion.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rlihf::fusion {

std::string_view to_string(Condition c) {
    switch (c) {
    case Condition::sparse: return "sparse";
    case Condition::dense: return "dense";
    case Condition::rlihf: return "rlihf";
    }
    return "?";
}

Condition parse_condition(std::string_view name) {
    if (name == "sparse") return Condition::sparse;
    if (name == "dense") return Condition::dense;
    if (name == "rlihf") return Condition::rlihf;
    throw std::invalid_argument("unknown condition '" + std::string(name) + "' (expected sparse, dense or rlihf)");
}

std::string_view to_string(FeedbackMode m) { return m == FeedbackMode::oracle ? "oracle" : "decoded"; }

FeedbackMode parse_mode(std::string_view name) {
    if (name == "oracle") return FeedbackMode::oracle;
    if (name == "decoded") return FeedbackMode::decoded;
    throw std::invalid_argument("unknown feedback mode '" + std::string(name) + "' (expected oracle or decoded)");
}

double compose(double r_env, double r_hf, double w_hf, bool centering) {
    if (!(r_hf >= 0.0 && r_hf <= 1.0)) throw std::invalid_argument("compose: r_hf must lie in [0, 1]");
    if (!(w_hf >= 0.0)) throw std::invalid_argument("compose: w_hf must be >= 0");
    return r_env + w_hf * (centering ? r_hf - 0.5 : r_hf);
}

void PipelineConfig::validate() const {
    if (cadence < 1) throw std::invalid_argument("pipeline: cadence must be >= 1");
    if (lag_samples < 0) throw std::invalid_argument("pipeline: lag_samples must be >= 0");
    if (calibration_per_class < 2) throw std::invalid_argument("pipeline: calibration_per_class must be >= 2");
    if (cohort_subjects < 2) throw std::invalid_argument("pipeline: cohort needs at least two subjects");
    if (!(cohort_noise_min > 0.0 && cohort_noise_max >= cohort_noise_min))
        throw std::invalid_argument("pipeline: cohort noise range must satisfy 0 < min <= max");
    if (cohort_per_class < 2) throw std::invalid_argument("pipeline: cohort_per_class must be >= 2");
    oracle.validate();
    signal.validate();
    subject.validate(signal.channels, 1000.0 * signal.epoch_seconds);
    decoder.validate();
}

FeedbackPipeline::FeedbackPipeline(PipelineConfig cfg, std::uint64_t channel_seed,
                                   std::shared_ptr<const decoder::ErrpClassifier> classifier)
    : cfg_(std::move(cfg)), rng_(derive_seed(channel_seed, "oracle")), classifier_(std::move(classifier)) {
    cfg_.validate();
    if (cfg_.mode == FeedbackMode::decoded) {
        if (!classifier_) throw std::invalid_argument("decoded feedback needs a trained classifier");
        if (classifier_->channels() != cfg_.signal.channels || classifier_->samples() != cfg_.signal.epoch_samples())
            throw std::invalid_argument("classifier geometry does not match the signal configuration");
        streamer_ = std::make_unique<signal::EpochStreamer>(cfg_.subject, cfg_.signal,
                                                            derive_seed(channel_seed, "stream"), cfg_.lag_samples);
    }
}

FeedbackSample FeedbackPipeline::event(bool is_error) {
    ++events_;
    decoder::Prediction pred;
    if (cfg_.mode == FeedbackMode::oracle) {
        pred = decoder::oracle_decode(is_error, cfg_.oracle, rng_);
    } else {
        const auto onset = streamer_->stream_event(is_error);
        try {
            pred = classifier_->predict(streamer_->epoch_at(onset));
        } catch (const signal::EpochNotReady&) {
            ++skipped_;
            FeedbackSample late;
            late.skipped = true;
            return late;
        }
    }
    FeedbackSample s;
    s.p_errp = decoder::p_errp(pred);
    s.r_hf = decoder::decode_reward(s.p_errp);
    s.predicted = pred.argmax();
    if ((s.predicted == 1) == is_error) ++correct_;
    return s;
}

double FeedbackPipeline::online_accuracy() const {
    const long decoded = events_ - skipped_;
    return decoded > 0 ? static_cast<double>(correct_) / static_cast<double>(decoded) : 0.0;
}

CompositeReward FeedbackPipeline::feedback(const env::EnvState& state, const env::Scenario& scenario,
                                           const env::IdealPath& ideal, double r_env, double w_hf) {
    CompositeReward out;
    out.r_env = r_env;
    out.label = env::observer_feedback(state, scenario, ideal).is_error;
    double r_sum = 0.0, p_sum = 0.0;
    int used = 0;
    for (int k = 0; k < cfg_.cadence; ++k) {
        const FeedbackSample s = event(out.label);
        if (s.skipped) {
            ++out.skipped_events;
            continue;
        }
        r_sum += s.r_hf;
        p_sum += s.p_errp;
        ++used;
    }
    const double r_hf = used > 0 ? r_sum / used : 0.5;
    out.r_hf = r_hf;
    out.p_errp = used > 0 ? p_sum / used : 0.5;
    out.r_hf_centered = r_hf - 0.5;
    out.total = compose(r_env, r_hf, w_hf, cfg_.baseline_centering);
    return out;
}

CompositeReward condition_reward(Condition condition, const env::StepOutcome& outcome, const env::Scenario& scenario,
                                 const env::IdealPath& ideal, FeedbackPipeline* pipeline, double w_hf) {
    switch (condition) {
    case Condition::sparse:
    case Condition::dense: {
        CompositeReward r;
        r.r_env = condition == Condition::sparse ? outcome.reward.sparse
                                                 : outcome.reward.sparse + outcome.reward.dense_shaping;
        r.total = r.r_env;
        return r;
    }
    case Condition::rlihf:
        if (!pipeline) throw std::invalid_argument("rlihf condition needs a feedback pipeline");
        return pipeline->feedback(outcome.after, scenario, ideal, outcome.reward.sparse, w_hf);
    }
    throw std::logic_error("unhandled condition");
}

std::shared_ptr<const decoder::ErrpClassifier> calibrate_decoder(const PipelineConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto data = signal::generate_dataset(cfg.subject, cfg.calibration_per_class, cfg.signal, seed);
    return std::make_shared<const decoder::ErrpClassifier>(decoder::train(data, cfg.decoder));
}

namespace {

// Shortest representation that reads back to the same double.
std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

}  // namespace

void write_reward_log(std::ostream& os, const std::vector<RewardLogRow>& rows) {
    os << "step,condition,r_env,r_hf,w_hf,total,label,p_errp\n";
    for (const auto& row : rows) {
        const auto& r = row.reward;
        os << row.step << ',' << to_string(row.condition) << ',' << fmt(r.r_env) << ',';
        if (r.r_hf) os << fmt(*r.r_hf);
        os << ',' << fmt(row.w_hf) << ',' << fmt(r.total) << ',';
        if (r.r_hf) os << (r.label ? 1 : 0) << ',' << fmt(r.p_errp);
        else os << ',';
        os << '\n';
    }
}

}  // namespace rlihf::fusion
