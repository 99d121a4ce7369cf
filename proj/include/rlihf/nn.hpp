#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rlihf/rng.hpp"

namespace rlihf::nn {

enum class Activation { identity, relu, tanh };

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Intermediates recorded by a forward pass, consumed by backward().
struct MlpCache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
    bool empty() const { return inputs.empty(); }
};

/// Fully connected network. Samples are columns: an input batch is
/// (input_dim x batch). All parameters live in one flat vector so that
/// optimisers, Polyak averaging, checkpoints and finite-difference checks
/// can treat a network as a single point in parameter space.
///
/// Layer l occupies [W_l (out x in, column-major), b_l (out)] in that vector.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> widths, Activation hidden, Activation output = Activation::identity);

    /// Fan-in scaled uniform init (U(-1/sqrt(in), 1/sqrt(in))) for weights and biases.
    void init_uniform(Rng& rng);

    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    std::size_t layer_count() const { return widths_.size() - 1; }
    std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
    const std::vector<int>& widths() const { return widths_; }
    Activation hidden_activation() const { return hidden_; }
    Activation output_activation() const { return output_; }

    Eigen::VectorXd& parameters() { return params_; }
    const Eigen::VectorXd& parameters() const { return params_; }

    Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
    Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
    Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& input, MlpCache& cache) const;

    /// Reverse-mode gradient of sum(output_grad .* output) with respect to every
    /// parameter. When input_grad is non-null it receives d/d(input).
    Eigen::VectorXd backward(const MlpCache& cache, const Eigen::MatrixXd& output_grad,
                             Eigen::MatrixXd* input_grad = nullptr) const;
    /// d/d(input) only; skips the parameter gradient.
    Eigen::MatrixXd input_gradient(const MlpCache& cache, const Eigen::MatrixXd& output_grad) const;

private:
    Eigen::MatrixXd forward_impl(const Eigen::MatrixXd& input, MlpCache* cache) const;
    void backward_impl(const MlpCache& cache, const Eigen::MatrixXd& output_grad, Eigen::VectorXd* param_grad,
                       Eigen::MatrixXd* input_grad) const;
    Activation activation_of(std::size_t layer) const {
        return layer + 1 == layer_count() ? output_ : hidden_;
    }

    std::vector<int> widths_;
    Activation hidden_ = Activation::relu;
    Activation output_ = Activation::identity;
    std::vector<std::size_t> offsets_;  // start of W_l for each layer
    Eigen::VectorXd params_;
};

/// Adam with bias-corrected moments.
class Adam {
public:
    Adam() = default;
    explicit Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

    double learning_rate() const { return lr_; }
    long steps() const { return t_; }

private:
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    Eigen::VectorXd m_, v_;
};

/// target <- tau * online + (1 - tau) * target
void polyak_update(Eigen::VectorXd& target, const Eigen::VectorXd& online, double tau);

}  // namespace rlihf::nn
