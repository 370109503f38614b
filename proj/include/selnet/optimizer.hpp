#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "selnet/tensor.hpp"

namespace selnet {

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  // Learning rate halves every `halving_period` epochs; 0 disables.
  std::size_t halving_period = 0;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

void validate(const OptimizerConfig& config);

/// v <- momentum * v + grad; theta <- theta - lr * (v + wd * theta).
void sgd_step(std::span<double> param, std::span<const double> grad,
              std::span<double> velocity, const SgdConfig& config, double lr);

/// Bias-corrected Adam with coupled weight decay:
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta.
/// `step` is the 1-based index of this update.
void adam_step(std::span<double> param, std::span<const double> grad,
               std::span<double> first_moment, std::span<double> second_moment,
               std::uint64_t step, const AdamConfig& config, double lr);

/// lr0 * 0.5^floor(epoch / period) for SGD with halving; constant otherwise.
double lr_schedule(std::size_t epoch, const OptimizerConfig& config);

/// Applies one rule to a fixed list of parameter tensors, reading their
/// accumulated gradients. Parameters without a gradient get a zero one.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Tensor> params);

  void step(std::size_t epoch);
  void zero_grad();
  std::uint64_t steps_taken() const { return steps_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> slot_a_;  // velocity or first moment
  std::vector<std::vector<double>> slot_b_;  // second moment
  std::uint64_t steps_ = 0;
};

}  // namespace selnet
