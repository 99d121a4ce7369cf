#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rlihf/decoder.hpp"
#include "rlihf/env.hpp"
#include "rlihf/signal.hpp"

namespace rlihf::fusion {

enum class Condition { sparse, dense, rlihf };

std::string_view to_string(Condition c);
/// Throws std::invalid_argument on an unknown name.
Condition parse_condition(std::string_view name);

enum class FeedbackMode { oracle, decoded };

std::string_view to_string(FeedbackMode m);
FeedbackMode parse_mode(std::string_view name);

/// total = r_env + w_hf * (r_hf - 0.5) with centering, r_env + w_hf * r_hf without.
double compose(double r_env, double r_hf, double w_hf, bool centering);

struct PipelineConfig {
    FeedbackMode mode = FeedbackMode::oracle;
    int cadence = 1;  // feedback events per environment step
    bool baseline_centering = true;
    decoder::OracleChannelConfig oracle;
    // decoded mode
    signal::SubjectProfile subject;
    signal::SignalConfig signal;
    int lag_samples = 0;
    int calibration_per_class = 150;
    decoder::TrainConfig decoder;
    // decoder-bench cohort
    int cohort_subjects = 12;
    double cohort_noise_min = 1.5;
    double cohort_noise_max = 20.0;
    int cohort_per_class = 100;

    void validate() const;
};

/// One decoded feedback event.
struct FeedbackSample {
    bool skipped = false;  // epoch not ready; r_hf is neutral
    double p_errp = 0.5;
    double r_hf = 0.5;
    int predicted = 0;
};

struct CompositeReward {
    double r_env = 0.0;
    std::optional<double> r_hf;  // absent when the condition never consults feedback
    double r_hf_centered = 0.0;
    double p_errp = 0.0;
    bool label = false;  // observer verdict, true = error
    double total = 0.0;
    int skipped_events = 0;
};

/// Observer -> (oracle channel | streamed epoch -> ring buffer -> classifier) -> r_hf.
class FeedbackPipeline {
public:
    /// Decoded mode requires a trained classifier matching the signal geometry.
    FeedbackPipeline(PipelineConfig cfg, std::uint64_t channel_seed,
                     std::shared_ptr<const decoder::ErrpClassifier> classifier = nullptr);

    FeedbackSample event(bool is_error);
    /// cadence events for the observer label of `state`; r_hf is the mean over
    /// events that were not skipped (0.5 if all were).
    CompositeReward feedback(const env::EnvState& state, const env::Scenario& scenario, const env::IdealPath& ideal,
                             double r_env, double w_hf);

    long events() const { return events_; }
    long skipped() const { return skipped_; }
    long correct() const { return correct_; }
    /// Argmax agreement with observer labels over events that were decoded.
    double online_accuracy() const;
    const PipelineConfig& config() const { return cfg_; }

private:
    PipelineConfig cfg_;
    Rng rng_;
    std::shared_ptr<const decoder::ErrpClassifier> classifier_;
    std::unique_ptr<signal::EpochStreamer> streamer_;
    long events_ = 0, skipped_ = 0, correct_ = 0;
};

/// Reward stored in the transition for the given condition. Dense and sparse
/// never touch the pipeline; rlihf composes the sparse reward with feedback.
CompositeReward condition_reward(Condition condition, const env::StepOutcome& outcome, const env::Scenario& scenario,
                                 const env::IdealPath& ideal, FeedbackPipeline* pipeline, double w_hf);

/// Subject-specific decoder calibrated on a freshly streamed balanced session.
std::shared_ptr<const decoder::ErrpClassifier> calibrate_decoder(const PipelineConfig& cfg, std::uint64_t seed);

struct RewardLogRow {
    long step = 0;
    Condition condition = Condition::sparse;
    CompositeReward reward;
    double w_hf = 0.0;
};

/// step,condition,r_env,r_hf,w_hf,total,label,p_errp (feedback columns empty when unused).
void write_reward_log(std::ostream& os, const std::vector<RewardLogRow>& rows);

}  // namespace rlihf::fusion
