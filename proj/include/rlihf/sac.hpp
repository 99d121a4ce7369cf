#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rlihf/nn.hpp"
#include "rlihf/rng.hpp"

namespace rlihf::agent {

struct SacConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    int batch_size = 256;
    double alpha = 0.2;
    bool auto_alpha = false;
    std::optional<double> target_entropy;  // default -|A|
    int start_steps = 1000;
    int update_every = 1;
    std::size_t buffer_capacity = 100000;
    std::vector<int> hidden{64, 64};

    void validate() const;
};

struct Transition {
    Eigen::VectorXd obs;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_obs;
    bool done = false;
};

/// Column-per-sample batch.
struct Batch {
    Eigen::MatrixXd obs;
    Eigen::MatrixXd action;
    Eigen::VectorXd reward;
    Eigen::MatrixXd next_obs;
    Eigen::VectorXd done;  // 1.0 = terminal
    std::size_t size() const { return static_cast<std::size_t>(reward.size()); }
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim);

    void add(const Transition& t);
    /// Uniform indices with replacement; requires size() >= batch_size.
    std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;
    Batch gather(const std::vector<std::size_t>& indices) const;
    Batch sample(std::size_t batch_size, Rng& rng) const { return gather(sample_indices(batch_size, rng)); }

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::size_t size_ = 0;
    std::size_t next_ = 0;
    Eigen::MatrixXd obs_, action_, next_obs_;
    Eigen::VectorXd reward_, done_;
};

class UnderfilledBuffer : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reparameterised squashed-Gaussian sample for a batch.
struct PolicySample {
    Eigen::MatrixXd action;    // tanh(u)
    Eigen::MatrixXd pre_tanh;  // u
    Eigen::VectorXd log_prob;
    Eigen::MatrixXd mean;
    Eigen::MatrixXd log_std;   // clamped
    Eigen::MatrixXd raw_log_std;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Trunk MLP emitting [mean; log_std] per action dimension.
class Actor {
public:
    Actor() = default;
    Actor(int obs_dim, int action_dim, const std::vector<int>& hidden);

    /// u = mean + exp(log_std) * noise, action = tanh(u),
    /// log_prob = N(u; mean, std) - sum log(1 - tanh(u)^2 + 1e-6).
    PolicySample rsample(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise,
                         nn::MlpCache* cache = nullptr) const;

    /// Single observation. Deterministic mode returns tanh(mean) and no log-prob.
    std::pair<Eigen::VectorXd, std::optional<double>> act(const Eigen::VectorXd& obs, Rng& rng,
                                                           bool deterministic) const;

    int obs_dim() const { return net_.input_dim(); }
    int action_dim() const { return action_dim_; }
    nn::Mlp& network() { return net_; }
    const nn::Mlp& network() const { return net_; }

private:
    int action_dim_ = 0;
    nn::Mlp net_;
};

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// y = r + gamma * (1 - done) * (min(q1', q2') - alpha * log_pi').
double soft_target(double reward, bool done, double q1_next, double q2_next, double log_prob_next, double gamma,
                   double alpha);

/// Bellman targets with a' drawn from the current actor using the given noise.
Eigen::VectorXd critic_target(const Batch& batch, const nn::Mlp& target_q1, const nn::Mlp& target_q2,
                              const Actor& actor, double gamma, double alpha, const Eigen::MatrixXd& noise);

struct Losses {
    double critic = 0.0;
    double actor = 0.0;
    double alpha = 0.0;
};

class SacAgent {
public:
    SacAgent(int obs_dim, int action_dim, SacConfig cfg, Rng& init_rng);

    std::pair<Eigen::VectorXd, std::optional<double>> act(const Eigen::VectorXd& obs, Rng& rng,
                                                           bool deterministic) const {
        return actor_.act(obs, rng, deterministic);
    }

    /// One critic step, one actor step, optional temperature step, Polyak update.
    Losses update(const Batch& batch, Rng& rng);
    Losses update(const ReplayBuffer& buffer, Rng& rng);

    /// sum_i mean((Q_i(s,a) - y)^2); gradients for each critic when requested.
    double critic_loss(const Batch& batch, const Eigen::VectorXd& targets, Eigen::VectorXd* grad_q1,
                       Eigen::VectorXd* grad_q2) const;
    /// mean(alpha * log_pi(a|s) - min_i Q_i(s, a)), a reparameterised with `noise`.
    double actor_loss(const Batch& batch, const Eigen::MatrixXd& noise, Eigen::VectorXd* grad,
                      Eigen::VectorXd* log_prob = nullptr) const;

    double alpha() const;
    const SacConfig& config() const { return cfg_; }
    Actor& actor() { return actor_; }
    const Actor& actor() const { return actor_; }
    nn::Mlp& q1() { return q1_; }
    nn::Mlp& q2() { return q2_; }
    nn::Mlp& target_q1() { return tq1_; }
    nn::Mlp& target_q2() { return tq2_; }
    const nn::Mlp& q1() const { return q1_; }
    const nn::Mlp& q2() const { return q2_; }
    const nn::Mlp& target_q1() const { return tq1_; }
    const nn::Mlp& target_q2() const { return tq2_; }

private:
    SacConfig cfg_;
    Actor actor_;
    nn::Mlp q1_, q2_, tq1_, tq2_;
    nn::Adam actor_opt_, q1_opt_, q2_opt_, alpha_opt_;
    Eigen::VectorXd log_alpha_;  // size 1, so Adam can drive it
    double target_entropy_ = 0.0;
};

}  // namespace rlihf::agent
