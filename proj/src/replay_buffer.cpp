#include "rlihf/sac.hpp"

#include <random>
#include <string>

namespace rlihf::agent {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be >= 1");
    if (obs_dim <= 0 || action_dim <= 0) throw std::invalid_argument("replay buffer dims must be positive");
    const auto cap = static_cast<Eigen::Index>(capacity);
    obs_.resize(obs_dim, cap);
    next_obs_.resize(obs_dim, cap);
    action_.resize(action_dim, cap);
    reward_.resize(cap);
    done_.resize(cap);
}

void ReplayBuffer::add(const Transition& t) {
    if (t.obs.size() != obs_.rows() || t.next_obs.size() != obs_.rows() || t.action.size() != action_.rows())
        throw nn::ShapeError("transition shape does not match replay buffer");
    const auto k = static_cast<Eigen::Index>(next_);
    obs_.col(k) = t.obs;
    next_obs_.col(k) = t.next_obs;
    action_.col(k) = t.action;
    reward_[k] = t.reward;
    done_[k] = t.done ? 1.0 : 0.0;
    next_ = (next_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (size_ < batch_size)
        throw UnderfilledBuffer("replay buffer holds " + std::to_string(size_) + " transitions, batch needs " +
                                std::to_string(batch_size));
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
    const auto n = static_cast<Eigen::Index>(indices.size());
    Batch b;
    b.obs.resize(obs_.rows(), n);
    b.next_obs.resize(obs_.rows(), n);
    b.action.resize(action_.rows(), n);
    b.reward.resize(n);
    b.done.resize(n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const std::size_t i = indices[static_cast<std::size_t>(c)];
        if (i >= size_) throw std::out_of_range("replay index beyond stored transitions");
        const auto k = static_cast<Eigen::Index>(i);
        b.obs.col(c) = obs_.col(k);
        b.next_obs.col(c) = next_obs_.col(k);
        b.action.col(c) = action_.col(k);
        b.reward[c] = reward_[k];
        b.done[c] = done_[k];
    }
    return b;
}

}  // namespace rlihf::agent
