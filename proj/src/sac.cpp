#include "rlihf/sac.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace rlihf::agent {
namespace {

constexpr double kSquashEps = 1e-6;

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& action) {
    Eigen::MatrixXd x(obs.rows() + action.rows(), obs.cols());
    x.topRows(obs.rows()) = obs;
    x.bottomRows(action.rows()) = action;
    return x;
}

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(out);
    return w;
}

}  // namespace

void SacConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("sac: gamma must be in [0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("sac: tau must be in (0,1]");
    if (!(actor_lr > 0.0 && critic_lr > 0.0 && alpha_lr > 0.0))
        throw std::invalid_argument("sac: learning rates must be > 0");
    if (batch_size < 1) throw std::invalid_argument("sac: batch_size must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("sac: alpha must be > 0");
    if (start_steps < 0) throw std::invalid_argument("sac: start_steps must be >= 0");
    if (update_every < 1) throw std::invalid_argument("sac: update_every must be >= 1");
    if (buffer_capacity < static_cast<std::size_t>(batch_size))
        throw std::invalid_argument("sac: buffer_capacity must be >= batch_size");
    if (hidden.empty()) throw std::invalid_argument("sac: need at least one hidden layer");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("sac: hidden widths must be >= 1");
}

Actor::Actor(int obs_dim, int action_dim, const std::vector<int>& hidden)
    : action_dim_(action_dim), net_(widths(obs_dim, hidden, 2 * action_dim), nn::Activation::relu) {}

PolicySample Actor::rsample(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise, nn::MlpCache* cache) const {
    if (noise.rows() != action_dim_ || noise.cols() != obs.cols())
        throw nn::ShapeError("policy noise shape does not match batch");
    const Eigen::MatrixXd out = cache ? net_.forward(obs, *cache) : net_.forward(obs);
    PolicySample s;
    s.mean = out.topRows(action_dim_);
    s.raw_log_std = out.bottomRows(action_dim_);
    s.log_std = s.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    s.pre_tanh = s.mean.array() + s.log_std.array().exp() * noise.array();
    s.action = s.pre_tanh.array().tanh();
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    const Eigen::ArrayXXd gauss = -0.5 * noise.array().square() - s.log_std.array() - half_log_2pi;
    const Eigen::ArrayXXd squash = (1.0 - s.action.array().square() + kSquashEps).log();
    s.log_prob = (gauss - squash).colwise().sum().transpose();
    return s;
}

std::pair<Eigen::VectorXd, std::optional<double>> Actor::act(const Eigen::VectorXd& obs, Rng& rng,
                                                             bool deterministic) const {
    if (deterministic) {
        const Eigen::MatrixXd out = net_.forward(obs);
        return {out.topRows(action_dim_).col(0).array().tanh().matrix(), std::nullopt};
    }
    const PolicySample s = rsample(obs, standard_normal(action_dim_, 1, rng));
    return {s.action.col(0), s.log_prob[0]};
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

double soft_target(double reward, bool done, double q1_next, double q2_next, double log_prob_next, double gamma,
                   double alpha) {
    if (done) return reward;
    return reward + gamma * (std::min(q1_next, q2_next) - alpha * log_prob_next);
}

Eigen::VectorXd critic_target(const Batch& batch, const nn::Mlp& target_q1, const nn::Mlp& target_q2,
                              const Actor& actor, double gamma, double alpha, const Eigen::MatrixXd& noise) {
    const PolicySample next = actor.rsample(batch.next_obs, noise);
    const Eigen::MatrixXd x = critic_input(batch.next_obs, next.action);
    const Eigen::RowVectorXd q1 = target_q1.forward(x);
    const Eigen::RowVectorXd q2 = target_q2.forward(x);
    Eigen::VectorXd y(batch.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y[i] = soft_target(batch.reward[i], batch.done[i] > 0.5, q1[i], q2[i], next.log_prob[i], gamma, alpha);
    return y;
}

SacAgent::SacAgent(int obs_dim, int action_dim, SacConfig cfg, Rng& init_rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (obs_dim < 1 || action_dim < 1) throw std::invalid_argument("sac: dims must be positive");
    actor_ = Actor(obs_dim, action_dim, cfg_.hidden);
    actor_.network().init_uniform(init_rng);
    const auto cw = widths(obs_dim + action_dim, cfg_.hidden, 1);
    q1_ = nn::Mlp(cw, nn::Activation::relu);
    q2_ = nn::Mlp(cw, nn::Activation::relu);
    q1_.init_uniform(init_rng);
    q2_.init_uniform(init_rng);
    tq1_ = q1_;
    tq2_ = q2_;
    actor_opt_ = nn::Adam(actor_.network().parameter_count(), cfg_.actor_lr);
    q1_opt_ = nn::Adam(q1_.parameter_count(), cfg_.critic_lr);
    q2_opt_ = nn::Adam(q2_.parameter_count(), cfg_.critic_lr);
    alpha_opt_ = nn::Adam(1, cfg_.alpha_lr);
    log_alpha_ = Eigen::VectorXd::Constant(1, std::log(cfg_.alpha));
    target_entropy_ = cfg_.target_entropy.value_or(-static_cast<double>(action_dim));
}

double SacAgent::alpha() const { return std::exp(log_alpha_[0]); }

double SacAgent::critic_loss(const Batch& batch, const Eigen::VectorXd& targets, Eigen::VectorXd* grad_q1,
                             Eigen::VectorXd* grad_q2) const {
    const Eigen::MatrixXd x = critic_input(batch.obs, batch.action);
    const double n = static_cast<double>(batch.size());
    double loss = 0.0;
    auto one = [&](const nn::Mlp& q, Eigen::VectorXd* grad) {
        nn::MlpCache cache;
        const Eigen::RowVectorXd pred = q.forward(x, cache);
        const Eigen::RowVectorXd err = pred - targets.transpose();
        loss += err.squaredNorm() / n;
        if (grad) *grad = q.backward(cache, (2.0 / n) * err);
    };
    one(q1_, grad_q1);
    one(q2_, grad_q2);
    return loss;
}

double SacAgent::actor_loss(const Batch& batch, const Eigen::MatrixXd& noise, Eigen::VectorXd* grad,
                            Eigen::VectorXd* log_prob) const {
    const double n = static_cast<double>(batch.size());
    const double a = alpha();
    nn::MlpCache acache;
    const PolicySample s = actor_.rsample(batch.obs, noise, &acache);
    const Eigen::MatrixXd x = critic_input(batch.obs, s.action);
    nn::MlpCache c1, c2;
    const Eigen::RowVectorXd q1 = q1_.forward(x, c1);
    const Eigen::RowVectorXd q2 = q2_.forward(x, c2);
    const Eigen::RowVectorXd qmin = q1.cwiseMin(q2);
    if (log_prob) *log_prob = s.log_prob;
    const double loss = (a * s.log_prob.sum() - qmin.sum()) / n;
    if (!grad) return loss;

    // dL/dQmin = -1/n routed to whichever critic is smaller.
    const Eigen::Index ad = actor_.action_dim();
    Eigen::MatrixXd dqa = Eigen::MatrixXd::Zero(ad, x.cols());
    const Eigen::RowVectorXd pick1 = (q1.array() <= q2.array()).cast<double>();
    const Eigen::RowVectorXd g1 = -pick1 / n;
    const Eigen::RowVectorXd g2 = -(1.0 - pick1.array()).matrix() / n;
    if (g1.cwiseAbs().maxCoeff() > 0.0) dqa += q1_.input_gradient(c1, g1).bottomRows(ad);
    if (g2.cwiseAbs().maxCoeff() > 0.0) dqa += q2_.input_gradient(c2, g2).bottomRows(ad);

    const Eigen::ArrayXXd t = s.action.array();
    const Eigen::ArrayXXd one_m = 1.0 - t.square();
    const Eigen::ArrayXXd dlogp_du = 2.0 * t * one_m / (one_m + kSquashEps);
    const Eigen::ArrayXXd dl_du = (a / n) * dlogp_du + dqa.array() * one_m;
    const Eigen::ArrayXXd std = s.log_std.array().exp();
    Eigen::ArrayXXd dl_dls = dl_du * noise.array() * std - a / n;
    const Eigen::ArrayXXd raw = s.raw_log_std.array();
    dl_dls = (raw > kLogStdMin && raw < kLogStdMax).select(dl_dls, 0.0);

    Eigen::MatrixXd out_grad(2 * ad, x.cols());
    out_grad.topRows(ad) = dl_du.matrix();
    out_grad.bottomRows(ad) = dl_dls.matrix();
    *grad = actor_.network().backward(acache, out_grad);
    return loss;
}

Losses SacAgent::update(const Batch& batch, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index ad = actor_.action_dim();
    Losses out;

    const Eigen::VectorXd y = critic_target(batch, tq1_, tq2_, actor_, cfg_.gamma, alpha(), standard_normal(ad, n, rng));
    Eigen::VectorXd g1, g2;
    out.critic = critic_loss(batch, y, &g1, &g2);
    q1_opt_.step(q1_.parameters(), g1);
    q2_opt_.step(q2_.parameters(), g2);

    Eigen::VectorXd ga, logp;
    out.actor = actor_loss(batch, standard_normal(ad, n, rng), &ga, &logp);
    actor_opt_.step(actor_.network().parameters(), ga);

    if (cfg_.auto_alpha) {
        const double m = (logp.array() + target_entropy_).mean();
        out.alpha = -log_alpha_[0] * m;
        Eigen::VectorXd g = Eigen::VectorXd::Constant(1, -m);
        alpha_opt_.step(log_alpha_, g);
    }

    nn::polyak_update(tq1_.parameters(), q1_.parameters(), cfg_.tau);
    nn::polyak_update(tq2_.parameters(), q2_.parameters(), cfg_.tau);
    return out;
}

Losses SacAgent::update(const ReplayBuffer& buffer, Rng& rng) {
    return update(buffer.sample(static_cast<std::size_t>(cfg_.batch_size), rng), rng);
}

}  // namespace rlihf::agent
