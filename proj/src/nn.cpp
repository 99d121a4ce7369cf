#include "rlihf/nn.hpp"

#include <cmath>
#include <string>

namespace rlihf::nn {
namespace {

void apply(Activation act, Eigen::MatrixXd& x) {
    switch (act) {
    case Activation::identity:
        break;
    case Activation::relu:
        x = x.cwiseMax(0.0);
        break;
    case Activation::tanh:
        x = x.array().tanh().matrix();
        break;
    }
}

// Multiplies grad in place by the activation derivative evaluated at pre.
void apply_derivative(Activation act, const Eigen::MatrixXd& pre, Eigen::MatrixXd& grad) {
    switch (act) {
    case Activation::identity:
        break;
    case Activation::relu:
        grad = (pre.array() > 0.0).select(grad, 0.0);
        break;
    case Activation::tanh:
        grad.array() *= 1.0 - pre.array().tanh().square();
        break;
    }
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, Activation hidden, Activation output)
    : widths_(std::move(widths)), hidden_(hidden), output_(output) {
    if (widths_.size() < 2)
        throw ShapeError("mlp needs at least an input and an output width");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        if (widths_[l] <= 0 || widths_[l + 1] <= 0)
            throw ShapeError("mlp widths must be positive");
        offsets_.push_back(total);
        total += static_cast<std::size_t>(widths_[l] + 1) * widths_[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

void Mlp::init_uniform(Rng& rng) {
    for (std::size_t l = 0; l < layer_count(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
        auto w = weight(l);
        auto b = bias(l);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = uniform(rng, -bound, bound);
    }
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t layer) const {
    return {params_.data() + offsets_[layer], widths_[layer + 1], widths_[layer]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
    return {params_.data() + offsets_[layer] + static_cast<std::size_t>(widths_[layer + 1]) * widths_[layer],
            widths_[layer + 1]};
}
Eigen::Map<Eigen::MatrixXd> Mlp::weight(std::size_t layer) {
    return {params_.data() + offsets_[layer], widths_[layer + 1], widths_[layer]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t layer) {
    return {params_.data() + offsets_[layer] + static_cast<std::size_t>(widths_[layer + 1]) * widths_[layer],
            widths_[layer + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
    return forward_impl(input, nullptr);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, MlpCache& cache) const {
    return forward_impl(input, &cache);
}

Eigen::MatrixXd Mlp::forward_impl(const Eigen::MatrixXd& input, MlpCache* cache) const {
    if (widths_.empty()) throw ShapeError("forward on an empty mlp");
    if (input.rows() != input_dim())
        throw ShapeError("mlp input has " + std::to_string(input.rows()) + " rows, expected " +
                         std::to_string(input_dim()));
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    Eigen::MatrixXd x = input;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        Eigen::MatrixXd z = weight(l) * x;
        z.colwise() += bias(l);
        if (cache) {
            cache->inputs.push_back(std::move(x));
            cache->pre.push_back(z);
        }
        apply(activation_of(l), z);
        x = std::move(z);
    }
    return x;
}

Eigen::VectorXd Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& output_grad,
                              Eigen::MatrixXd* input_grad) const {
    Eigen::VectorXd grad;
    backward_impl(cache, output_grad, &grad, input_grad);
    return grad;
}

Eigen::MatrixXd Mlp::input_gradient(const MlpCache& cache, const Eigen::MatrixXd& output_grad) const {
    Eigen::MatrixXd input_grad;
    backward_impl(cache, output_grad, nullptr, &input_grad);
    return input_grad;
}

void Mlp::backward_impl(const MlpCache& cache, const Eigen::MatrixXd& output_grad, Eigen::VectorXd* param_grad,
                        Eigen::MatrixXd* input_grad) const {
    if (cache.empty() || cache.inputs.size() != layer_count())
        throw std::logic_error("mlp backward called without a matching forward cache");
    if (output_grad.rows() != output_dim() || output_grad.cols() != cache.pre.back().cols())
        throw ShapeError("output gradient shape does not match forward output");

    if (param_grad) *param_grad = Eigen::VectorXd::Zero(params_.size());
    Eigen::MatrixXd delta = output_grad;
    for (std::size_t li = layer_count(); li-- > 0;) {
        apply_derivative(activation_of(li), cache.pre[li], delta);
        if (param_grad) {
            const auto rows = widths_[li + 1];
            const auto cols = widths_[li];
            double* base = param_grad->data() + offsets_[li];
            Eigen::Map<Eigen::MatrixXd> dw(base, rows, cols);
            Eigen::Map<Eigen::VectorXd> db(base + static_cast<std::size_t>(rows) * cols, rows);
            dw.noalias() = delta * cache.inputs[li].transpose();
            db = delta.rowwise().sum();
        }
        if (li > 0 || input_grad) {
            Eigen::MatrixXd next = weight(li).transpose() * delta;
            delta = std::move(next);
        }
    }
    if (input_grad) *input_grad = std::move(delta);
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw ShapeError("adam state size does not match parameters");
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void polyak_update(Eigen::VectorXd& target, const Eigen::VectorXd& online, double tau) {
    if (target.size() != online.size()) throw ShapeError("polyak update on mismatched networks");
    if (tau == 1.0) {
        target = online;
        return;
    }
    target = tau * online + (1.0 - tau) * target;
}

}  // namespace rlihf::nn
