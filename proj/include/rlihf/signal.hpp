#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rlihf/rng.hpp"

namespace rlihf::signal {

struct SignalConfig {
    int channels = 8;
    double sample_rate = 256.0;  // Hz
    double epoch_seconds = 2.0;
    double low_hz = 1.0;
    double high_hz = 20.0;
    int filter_taps = 257;
    std::int64_t ring_capacity = 2048;  // samples

    int epoch_samples() const { return static_cast<int>(epoch_seconds * sample_rate + 0.5); }
    int group_delay() const { return (filter_taps - 1) / 2; }
    void validate() const;
};

struct SampleFrame {
    std::int64_t sample_index = 0;
    Eigen::VectorXd values;  // microvolts, one per channel
};

struct EEGEpoch {
    Eigen::MatrixXd data;  // channels x samples
    std::int64_t onset = 0;
    std::string subject_id;
    std::optional<bool> label;  // true = error
};

/// Synthetic participant: biphasic ERP (negative lobe then positive lobe) and
/// background noise level.
struct SubjectProfile {
    std::string subject_id = "s00";
    double n250_amplitude = -6.0;  // uV
    double p320_amplitude = 8.0;   // uV
    double n250_latency_ms = 250.0;
    double p320_latency_ms = 320.0;
    double n250_width_ms = 35.0;  // Gaussian sigma of each lobe
    double p320_width_ms = 55.0;
    double latency_jitter_ms = 15.0;
    double noise_std = 4.0;  // uV
    std::vector<double> spatial_weights;  // empty -> default_spatial_weights(C)

    void validate(int channels, double epoch_ms) const;
};

/// Fronto-central emphasis: Gaussian bump over channel index, peak weight 1.
std::vector<double> default_spatial_weights(int channels);

/// Deterministic template (channels x samples) with both lobes shifted by
/// latency_shift_ms. Sample k sits at time k / rate after the onset.
Eigen::MatrixXd erp_template(const SubjectProfile& profile, int channels, int samples,
                             double sample_rate, double latency_shift_ms = 0.0);

/// n subjects with noise_std swept geometrically from noise_min to noise_max and
/// mild per-subject variation of amplitudes and latencies.
std::vector<SubjectProfile> make_cohort(int n, double noise_min, double noise_max, int channels,
                                        Rng& rng);

/// Contiguous block of frames at a fixed rate: channels x n, column k is sample first_index + k.
struct Stream {
    std::int64_t first_index = 0;
    double sample_rate = 256.0;
    Eigen::MatrixXd samples;

    std::int64_t size() const { return samples.cols(); }
    SampleFrame frame(std::int64_t k) const { return {first_index + k, samples.col(k)}; }
};

/// White plus 1/f-like coloured noise, unit variance per component before
/// scaling, so the stationary std equals noise_std.
class BackgroundNoise {
public:
    BackgroundNoise(int channels, double noise_std, Rng& rng);
    Eigen::VectorXd next(Rng& rng);

private:
    static constexpr int kPoles = 3;
    int channels_;
    double noise_std_;
    Eigen::MatrixXd state_;  // channels x kPoles
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Noise plus one jittered template per error onset. Non-error onsets add nothing.
Stream generate_stream(const SubjectProfile& profile, const std::vector<std::int64_t>& error_onsets,
                       const std::vector<std::int64_t>& nonerror_onsets, std::int64_t duration,
                       const SignalConfig& cfg, Rng& rng);

/// Hamming-windowed sinc band-pass, each low-pass normalised to unit DC gain.
std::vector<double> design_bandpass(double low_hz, double high_hz, double sample_rate, int taps);
/// Hamming-windowed sinc low-pass with unit DC gain.
std::vector<double> design_lowpass(double cutoff_hz, double sample_rate, int taps);

/// Causal FIR applied per channel with persistent history, so successive
/// push() calls behave like one long stream.
class StreamingFir {
public:
    StreamingFir(std::vector<double> taps, int channels);
    Eigen::VectorXd push(const Eigen::VectorXd& frame);
    int group_delay() const { return static_cast<int>(taps_.size() - 1) / 2; }
    const std::vector<double>& taps() const { return taps_; }

private:
    std::vector<double> taps_;
    Eigen::MatrixXd history_;  // channels x taps, circular
    int head_ = 0;
};

/// Causal band-pass; output[k] corresponds to input[k - group_delay]. Zero initial state.
Stream bandpass_filter(const Stream& in, double low_hz = 1.0, double high_hz = 20.0, int taps = 257);

SampleFrame rereference_common_average(const SampleFrame& frame);
Stream rereference_common_average(const Stream& in);

/// Zero-phase anti-alias low-pass (edge-replicated) then keep every factor-th sample.
Stream decimate(const Stream& in, int factor);

class EpochNotReady : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class EpochEvicted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Single-writer ring of frames indexed by absolute sample index.
class RingBuffer {
public:
    RingBuffer(int channels, std::int64_t capacity);

    void write(const SampleFrame& frame);
    /// Epoch over [onset, onset + samples). Throws EpochNotReady / EpochEvicted.
    EEGEpoch extract_epoch(std::int64_t onset, int samples) const;
    bool available(std::int64_t onset, int samples) const;

    std::int64_t write_head() const { return write_head_; }
    std::int64_t capacity() const { return capacity_; }
    int channels() const { return static_cast<int>(store_.rows()); }

private:
    std::int64_t capacity_;
    std::int64_t write_head_ = 0;
    Eigen::MatrixXd store_;
};

/// Per-session acquisition chain: synthesis -> band-pass -> common average
/// reference -> ring buffer, with group delay compensated on write so frame
/// indices line up with the raw event onsets.
class EpochStreamer {
public:
    /// lag_samples holds back the tail of each event window, modelling
    /// acquisition latency (epochs then are not yet complete when requested).
    EpochStreamer(SubjectProfile profile, SignalConfig cfg, std::uint64_t seed, int lag_samples = 0);

    /// Streams the window for one feedback event and returns its onset.
    std::int64_t stream_event(bool is_error);
    EEGEpoch epoch_at(std::int64_t onset) const;

    const RingBuffer& buffer() const { return ring_; }
    const SubjectProfile& profile() const { return profile_; }
    const SignalConfig& config() const { return cfg_; }

private:
    void push_raw(const Eigen::VectorXd& raw);

    SubjectProfile profile_;
    SignalConfig cfg_;
    Rng rng_;
    BackgroundNoise noise_;
    StreamingFir fir_;
    RingBuffer ring_;
    std::normal_distribution<double> jitter_{0.0, 1.0};
    std::int64_t raw_index_ = 0;
    int lag_ = 0;
    std::deque<Eigen::VectorXd> pending_;  // synthesised but not yet acquired
};

/// Balanced labelled epochs for one subject, streamed in shuffled order.
std::vector<EEGEpoch> generate_dataset(const SubjectProfile& profile, int n_per_class,
                                       const SignalConfig& cfg, std::uint64_t seed);

}  // namespace rlihf::signal
