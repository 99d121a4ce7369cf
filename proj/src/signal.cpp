#include "rlihf/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace rlihf::signal {

void SignalConfig::validate() const {
    if (channels < 1) throw std::invalid_argument("signal: channels must be >= 1");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("signal: sample_rate must be positive");
    if (epoch_samples() < 1) throw std::invalid_argument("signal: epoch must contain samples");
    if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate / 2.0))
        throw std::invalid_argument("signal: band edges must satisfy 0 < low < high < rate/2");
    if (filter_taps < 3 || filter_taps % 2 == 0)
        throw std::invalid_argument("signal: filter_taps must be odd and >= 3");
    if (ring_capacity < epoch_samples())
        throw std::invalid_argument("signal: ring capacity must hold at least one epoch");
}

void SubjectProfile::validate(int channels, double epoch_ms) const {
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
        throw std::invalid_argument("subject " + subject_id + ": noise_std must be finite and >= 0");
    if (latency_jitter_ms < 0.0)
        throw std::invalid_argument("subject " + subject_id + ": negative latency jitter");
    for (double lat : {n250_latency_ms, p320_latency_ms}) {
        if (lat - 3.0 * latency_jitter_ms < 0.0 || lat + 3.0 * latency_jitter_ms >= epoch_ms)
            throw std::invalid_argument("subject " + subject_id + ": latency +- 3 jitter leaves the epoch");
    }
    if (!(n250_width_ms > 0.0 && p320_width_ms > 0.0))
        throw std::invalid_argument("subject " + subject_id + ": lobe widths must be positive");
    if (!spatial_weights.empty()) {
        if (static_cast<int>(spatial_weights.size()) != channels)
            throw std::invalid_argument("subject " + subject_id + ": spatial_weights length != channels");
        bool any = false;
        for (double w : spatial_weights) {
            if (w < 0.0 || w > 1.0) throw std::invalid_argument("subject " + subject_id + ": spatial weight outside [0,1]");
            any = any || w > 0.0;
        }
        if (!any) throw std::invalid_argument("subject " + subject_id + ": spatial weights all zero");
    }
}

std::vector<double> default_spatial_weights(int channels) {
    std::vector<double> w(static_cast<std::size_t>(channels));
    const double centre = 0.3 * (channels - 1);
    const double width = std::max(0.25 * channels, 0.5);
    for (int c = 0; c < channels; ++c) {
        const double d = (c - centre) / width;
        w[static_cast<std::size_t>(c)] = std::exp(-0.5 * d * d);
    }
    const double peak = *std::max_element(w.begin(), w.end());
    for (double& x : w) x /= peak;
    return w;
}

Eigen::MatrixXd erp_template(const SubjectProfile& profile, int channels, int samples,
                             double sample_rate, double latency_shift_ms) {
    const auto weights =
        profile.spatial_weights.empty() ? default_spatial_weights(channels) : profile.spatial_weights;
    Eigen::MatrixXd out(channels, samples);
    const double tn = profile.n250_latency_ms + latency_shift_ms;
    const double tp = profile.p320_latency_ms + latency_shift_ms;
    for (int k = 0; k < samples; ++k) {
        const double t = 1000.0 * k / sample_rate;
        const double dn = (t - tn) / profile.n250_width_ms;
        const double dp = (t - tp) / profile.p320_width_ms;
        const double v = profile.n250_amplitude * std::exp(-0.5 * dn * dn) +
                         profile.p320_amplitude * std::exp(-0.5 * dp * dp);
        for (int c = 0; c < channels; ++c) out(c, k) = weights[static_cast<std::size_t>(c)] * v;
    }
    return out;
}

std::vector<SubjectProfile> make_cohort(int n, double noise_min, double noise_max, int channels,
                                        Rng& rng) {
    if (n < 1) throw std::invalid_argument("cohort needs at least one subject");
    std::vector<SubjectProfile> out;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        SubjectProfile p;
        p.subject_id = (i < 9 ? "s0" : "s") + std::to_string(i + 1);
        const double frac = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        p.noise_std = noise_min * std::pow(noise_max / noise_min, frac);
        p.n250_amplitude *= std::clamp(1.0 + 0.1 * normal(rng), 0.7, 1.3);
        p.p320_amplitude *= std::clamp(1.0 + 0.1 * normal(rng), 0.7, 1.3);
        const double shift = std::clamp(15.0 * normal(rng), -40.0, 40.0);
        p.n250_latency_ms += shift;
        p.p320_latency_ms += shift;
        p.spatial_weights = default_spatial_weights(channels);
        p.validate(channels, 2000.0);
        out.push_back(std::move(p));
    }
    return out;
}

// Poles of the coloured components; each AR(1) is scaled to unit stationary variance.
namespace {
constexpr double kPole[3] = {0.5, 0.9, 0.98};
// Variance share of white noise and of each pole (sums to 1).
constexpr double kWhiteShare = 0.25;
constexpr double kPoleShare = 0.25;
}  // namespace

BackgroundNoise::BackgroundNoise(int channels, double noise_std, Rng& rng)
    : channels_(channels), noise_std_(noise_std), state_(channels, kPoles) {
    for (int c = 0; c < channels_; ++c)
        for (int j = 0; j < kPoles; ++j) state_(c, j) = normal_(rng);  // stationary start
}

Eigen::VectorXd BackgroundNoise::next(Rng& rng) {
    Eigen::VectorXd out(channels_);
    const double ws = std::sqrt(kWhiteShare);
    const double ps = std::sqrt(kPoleShare);
    for (int c = 0; c < channels_; ++c) {
        double v = ws * normal_(rng);
        for (int j = 0; j < kPoles; ++j) {
            const double a = kPole[j];
            state_(c, j) = a * state_(c, j) + std::sqrt(1.0 - a * a) * normal_(rng);
            v += ps * state_(c, j);
        }
        out[c] = noise_std_ * v;
    }
    return out;
}

Stream generate_stream(const SubjectProfile& profile, const std::vector<std::int64_t>& error_onsets,
                       const std::vector<std::int64_t>& nonerror_onsets, std::int64_t duration,
                       const SignalConfig& cfg, Rng& rng) {
    const int T = cfg.epoch_samples();
    const int C = cfg.channels;
    profile.validate(C, 1000.0 * T / cfg.sample_rate);
    if (duration < 0) throw std::invalid_argument("generate_stream: negative duration");
    auto check = [&](std::int64_t onset) {
        if (onset < 0 || onset + T > duration)
            throw std::out_of_range("generate_stream: onset " + std::to_string(onset) +
                                    " leaves no room for a full epoch");
    };
    for (auto o : error_onsets) check(o);
    for (auto o : nonerror_onsets) check(o);

    Stream s;
    s.sample_rate = cfg.sample_rate;
    s.samples.resize(C, duration);
    BackgroundNoise noise(C, profile.noise_std, rng);
    for (std::int64_t k = 0; k < duration; ++k) s.samples.col(k) = noise.next(rng);

    std::normal_distribution<double> jitter(0.0, 1.0);
    for (auto onset : error_onsets) {
        const double shift = profile.latency_jitter_ms * jitter(rng);
        s.samples.middleCols(onset, T) += erp_template(profile, C, T, cfg.sample_rate, shift);
    }
    return s;
}

namespace {

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

std::vector<double> windowed_sinc(double cutoff_hz, double sample_rate, int taps) {
    const double fc = cutoff_hz / sample_rate;
    const int m = taps - 1;
    std::vector<double> h(static_cast<std::size_t>(taps));
    for (int n = 0; n < taps; ++n) {
        const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / m);
        h[static_cast<std::size_t>(n)] = w * 2.0 * fc * sinc(2.0 * fc * (n - m / 2.0));
    }
    const double sum = std::accumulate(h.begin(), h.end(), 0.0);
    for (double& x : h) x /= sum;
    return h;
}

}  // namespace

std::vector<double> design_lowpass(double cutoff_hz, double sample_rate, int taps) {
    if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0))
        throw std::invalid_argument("lowpass cutoff outside (0, Nyquist)");
    if (taps < 3 || taps % 2 == 0) throw std::invalid_argument("fir taps must be odd and >= 3");
    return windowed_sinc(cutoff_hz, sample_rate, taps);
}

std::vector<double> design_bandpass(double low_hz, double high_hz, double sample_rate, int taps) {
    if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate / 2.0))
        throw std::invalid_argument("band edges must satisfy 0 < low < high < rate/2");
    auto hi = design_lowpass(high_hz, sample_rate, taps);
    const auto lo = design_lowpass(low_hz, sample_rate, taps);
    for (std::size_t i = 0; i < hi.size(); ++i) hi[i] -= lo[i];
    return hi;
}

StreamingFir::StreamingFir(std::vector<double> taps, int channels)
    : taps_(std::move(taps)),
      history_(Eigen::MatrixXd::Zero(channels, static_cast<Eigen::Index>(taps_.size()))) {}

Eigen::VectorXd StreamingFir::push(const Eigen::VectorXd& frame) {
    const int n = static_cast<int>(taps_.size());
    history_.col(head_) = frame;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(history_.rows());
    // y[t] = sum_j h[j] x[t - j]; head_ holds x[t].
    int idx = head_;
    for (int j = 0; j < n; ++j) {
        out.noalias() += taps_[static_cast<std::size_t>(j)] * history_.col(idx);
        idx = idx == 0 ? n - 1 : idx - 1;
    }
    head_ = head_ + 1 == n ? 0 : head_ + 1;
    return out;
}

Stream bandpass_filter(const Stream& in, double low_hz, double high_hz, int taps) {
    StreamingFir fir(design_bandpass(low_hz, high_hz, in.sample_rate, taps),
                     static_cast<int>(in.samples.rows()));
    Stream out{in.first_index, in.sample_rate, Eigen::MatrixXd(in.samples.rows(), in.samples.cols())};
    for (std::int64_t k = 0; k < in.size(); ++k) out.samples.col(k) = fir.push(in.samples.col(k));
    return out;
}

SampleFrame rereference_common_average(const SampleFrame& frame) {
    if (frame.values.size() < 2) throw std::invalid_argument("common average reference needs >= 2 channels");
    SampleFrame out = frame;
    out.values.array() -= frame.values.mean();
    return out;
}

Stream rereference_common_average(const Stream& in) {
    if (in.samples.rows() < 2) throw std::invalid_argument("common average reference needs >= 2 channels");
    Stream out = in;
    out.samples.rowwise() -= in.samples.colwise().mean();
    return out;
}

Stream decimate(const Stream& in, int factor) {
    if (factor < 1) throw std::invalid_argument("decimate: factor must be >= 1");
    if (factor == 1) return in;
    const std::int64_t n = in.size();
    const double cutoff = 0.8 * (in.sample_rate / factor) / 2.0;
    const int taps = 8 * factor + 1;
    const auto h = design_lowpass(cutoff, in.sample_rate, taps);
    const int half = taps / 2;

    Stream out;
    out.first_index = in.first_index / factor;
    out.sample_rate = in.sample_rate / factor;
    const std::int64_t m = (n + factor - 1) / factor;
    out.samples.resize(in.samples.rows(), m);
    for (std::int64_t i = 0; i < m; ++i) {
        const std::int64_t centre = i * factor;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(in.samples.rows());
        for (int j = 0; j < taps; ++j) {
            const std::int64_t src = std::clamp<std::int64_t>(centre + j - half, 0, n - 1);
            acc.noalias() += h[static_cast<std::size_t>(j)] * in.samples.col(src);
        }
        out.samples.col(i) = acc;
    }
    return out;
}

RingBuffer::RingBuffer(int channels, std::int64_t capacity)
    : capacity_(capacity), store_(Eigen::MatrixXd::Zero(channels, capacity)) {
    if (channels < 1 || capacity < 1) throw std::invalid_argument("ring buffer needs channels and capacity");
}

void RingBuffer::write(const SampleFrame& frame) {
    if (frame.sample_index != write_head_)
        throw std::invalid_argument("ring buffer: frame index " + std::to_string(frame.sample_index) +
                                    " != write head " + std::to_string(write_head_));
    if (frame.values.size() != store_.rows()) throw std::invalid_argument("ring buffer: channel count mismatch");
    store_.col(write_head_ % capacity_) = frame.values;
    ++write_head_;
}

bool RingBuffer::available(std::int64_t onset, int samples) const {
    return onset >= 0 && onset + samples <= write_head_ && onset >= write_head_ - capacity_;
}

EEGEpoch RingBuffer::extract_epoch(std::int64_t onset, int samples) const {
    if (samples > capacity_) throw std::invalid_argument("epoch longer than ring capacity");
    if (onset < 0) throw std::out_of_range("negative epoch onset");
    if (onset + samples > write_head_)
        throw EpochNotReady("epoch at " + std::to_string(onset) + " needs samples up to " +
                            std::to_string(onset + samples) + ", head is " + std::to_string(write_head_));
    if (onset < write_head_ - capacity_)
        throw EpochEvicted("epoch at " + std::to_string(onset) + " has been overwritten");
    EEGEpoch e;
    e.onset = onset;
    e.data.resize(store_.rows(), samples);
    for (int k = 0; k < samples; ++k) e.data.col(k) = store_.col((onset + k) % capacity_);
    return e;
}

EpochStreamer::EpochStreamer(SubjectProfile profile, SignalConfig cfg, std::uint64_t seed, int lag_samples)
    : profile_(std::move(profile)),
      cfg_(cfg),
      rng_(seed),
      noise_(cfg.channels, profile_.noise_std, rng_),
      fir_(design_bandpass(cfg.low_hz, cfg.high_hz, cfg.sample_rate, cfg.filter_taps), cfg.channels),
      ring_(cfg.channels, cfg.ring_capacity),
      lag_(lag_samples) {
    cfg_.validate();
    profile_.validate(cfg_.channels, 1000.0 * cfg_.epoch_seconds);
    if (lag_ < 0) throw std::invalid_argument("stream lag must be >= 0");
    // Prime the filter so the first event sees steady-state noise.
    for (int k = 0; k < cfg_.filter_taps; ++k) push_raw(noise_.next(rng_));
}

void EpochStreamer::push_raw(const Eigen::VectorXd& raw) {
    Eigen::VectorXd y = fir_.push(raw);
    const std::int64_t aligned = raw_index_ - fir_.group_delay();
    ++raw_index_;
    if (aligned < 0) return;
    y.array() -= y.mean();
    ring_.write({aligned, std::move(y)});
}

std::int64_t EpochStreamer::stream_event(bool is_error) {
    const int T = cfg_.epoch_samples();
    const int window = T + fir_.group_delay();
    const std::int64_t onset = raw_index_ + static_cast<std::int64_t>(pending_.size());

    Eigen::MatrixXd tmpl;
    if (is_error) {
        const double shift = profile_.latency_jitter_ms * jitter_(rng_);
        tmpl = erp_template(profile_, cfg_.channels, T, cfg_.sample_rate, shift);
    }
    for (int k = 0; k < window; ++k) {
        Eigen::VectorXd raw = noise_.next(rng_);
        if (is_error && k < T) raw += tmpl.col(k);
        pending_.push_back(std::move(raw));
    }
    while (static_cast<int>(pending_.size()) > lag_) {
        push_raw(pending_.front());
        pending_.pop_front();
    }
    return onset;
}

EEGEpoch EpochStreamer::epoch_at(std::int64_t onset) const {
    EEGEpoch e = ring_.extract_epoch(onset, cfg_.epoch_samples());
    e.subject_id = profile_.subject_id;
    return e;
}

std::vector<EEGEpoch> generate_dataset(const SubjectProfile& profile, int n_per_class,
                                       const SignalConfig& cfg, std::uint64_t seed) {
    if (n_per_class < 1) throw std::invalid_argument("dataset needs at least one epoch per class");
    std::vector<bool> labels;
    for (int i = 0; i < n_per_class; ++i) {
        labels.push_back(true);
        labels.push_back(false);
    }
    Rng order(derive_seed(seed, "order"));
    std::shuffle(labels.begin(), labels.end(), order);

    EpochStreamer streamer(profile, cfg, derive_seed(seed, "stream"));
    std::vector<EEGEpoch> out;
    out.reserve(labels.size());
    for (bool err : labels) {
        const auto onset = streamer.stream_event(err);
        EEGEpoch e = streamer.epoch_at(onset);
        e.label = err;
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace rlihf::signal
