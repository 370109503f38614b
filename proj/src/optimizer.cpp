#include "selnet/optimizer.hpp"

#include <cmath>
#include <string>

#include "selnet/error.hpp"

namespace selnet {
namespace {

void check_sizes(std::size_t param, std::size_t grad, std::size_t state) {
  if (param != grad || param != state) {
    throw ContractError("optimizer step: parameter of size " +
                        std::to_string(param) + " with gradient of size " +
                        std::to_string(grad) + " and state of size " +
                        std::to_string(state));
  }
}

}  // namespace

void validate(const OptimizerConfig& config) {
  std::visit(
      [](const auto& c) {
        if (!(c.lr > 0.0)) throw ConfigError("learning rate must be positive");
        if (!(c.weight_decay >= 0.0)) {
          throw ConfigError("weight decay must be non-negative");
        }
      },
      config);
  if (const auto* adam = std::get_if<AdamConfig>(&config)) {
    if (!(adam->beta1 >= 0.0 && adam->beta1 < 1.0 && adam->beta2 >= 0.0 &&
          adam->beta2 < 1.0 && adam->eps > 0.0)) {
      throw ConfigError("invalid Adam constants");
    }
  }
  if (const auto* sgd = std::get_if<SgdConfig>(&config)) {
    if (!(sgd->momentum >= 0.0 && sgd->momentum < 1.0)) {
      throw ConfigError("SGD momentum must lie in [0, 1)");
    }
  }
}

void sgd_step(std::span<double> param, std::span<const double> grad,
              std::span<double> velocity, const SgdConfig& config, double lr) {
  check_sizes(param.size(), grad.size(), velocity.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = config.momentum * velocity[i] + grad[i];
    param[i] -= lr * (velocity[i] + config.weight_decay * param[i]);
  }
}

void adam_step(std::span<double> param, std::span<const double> grad,
               std::span<double> first_moment, std::span<double> second_moment,
               std::uint64_t step, const AdamConfig& config, double lr) {
  check_sizes(param.size(), grad.size(), first_moment.size());
  check_sizes(param.size(), grad.size(), second_moment.size());
  if (step == 0) throw ContractError("Adam step index is 1-based");
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    first_moment[i] = config.beta1 * first_moment[i] + (1.0 - config.beta1) * grad[i];
    second_moment[i] =
        config.beta2 * second_moment[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = first_moment[i] / c1;
    const double v_hat = second_moment[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps) +
                lr * config.weight_decay * param[i];
  }
}

double lr_schedule(std::size_t epoch, const OptimizerConfig& config) {
  if (const auto* sgd = std::get_if<SgdConfig>(&config)) {
    if (sgd->halving_period == 0) return sgd->lr;
    return sgd->lr *
           std::pow(0.5, static_cast<double>(epoch / sgd->halving_period));
  }
  return std::get<AdamConfig>(config).lr;
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Tensor> params)
    : config_(config), params_(std::move(params)) {
  validate(config_);
  for (const Tensor& p : params_) {
    slot_a_.emplace_back(p.size(), 0.0);
    slot_b_.emplace_back(std::holds_alternative<AdamConfig>(config_) ? p.size() : 0,
                         0.0);
  }
}

void Optimizer::step(std::size_t epoch) {
  ++steps_;
  const double lr = lr_schedule(epoch, config_);
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    std::span<const double> grad = p.grad();
    if (grad.empty()) {
      zeros.assign(p.size(), 0.0);
      grad = zeros;
    }
    if (const auto* sgd = std::get_if<SgdConfig>(&config_)) {
      sgd_step(p.mutable_values(), grad, slot_a_[i], *sgd, lr);
    } else {
      adam_step(p.mutable_values(), grad, slot_a_[i], slot_b_[i], steps_,
                std::get<AdamConfig>(config_), lr);
    }
  }
}

void Optimizer::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace selnet
