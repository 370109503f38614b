#include "selnet/loss.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "selnet/error.hpp"

namespace selnet {

void LossConfig::validate() const {
  if (!(coverage > 0.0 && coverage <= 1.0)) {
    throw ConfigError("target coverage must lie in (0, 1], got " +
                      std::to_string(coverage));
  }
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

Tensor task_loss(TaskLoss kind, const Tensor& prediction,
                 std::span<const double> labels) {
  if (kind == TaskLoss::Squared) {
    if (prediction.rank() != 1 || prediction.size() != labels.size()) {
      throw DimensionError("squared loss: prediction " +
                           shape_string(prediction.shape()) + " vs " +
                           std::to_string(labels.size()) + " labels");
    }
    return square(prediction - Tensor::vector(labels));
  }
  if (prediction.rank() != 2 || prediction.dim(0) != labels.size()) {
    throw DimensionError("cross-entropy: prediction " +
                         shape_string(prediction.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t k = prediction.dim(1);
  std::vector<std::size_t> index(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = labels[i];
    if (!(y >= 0.0) || y != std::floor(y) || y >= static_cast<double>(k)) {
      throw DataError("label " + std::to_string(y) + " at row " +
                      std::to_string(i) + " is not a class index below " +
                      std::to_string(k));
    }
    index[i] = static_cast<std::size_t>(y);
  }
  return -log(clamp_min(pick_columns(prediction, index), 1e-12));
}

double psi(double a) { return a > 0.0 ? a * a : 0.0; }

Tensor psi(const Tensor& a) { return square(max0(a)); }

Tensor empirical_coverage(const Tensor& g) {
  if (g.size() == 0) throw ContractError("coverage of an empty batch");
  return mean(g);
}

Tensor empirical_selective_risk(const Tensor& losses, const Tensor& g) {
  if (losses.shape() != g.shape()) {
    throw DimensionError("selective risk: losses " +
                         shape_string(losses.shape()) + " vs selection " +
                         shape_string(g.shape()));
  }
  Tensor coverage = empirical_coverage(g);
  if (!(coverage.item() > 0.0)) {
    throw DegenerateCoverageError(
        "empirical coverage is zero: every sample was rejected");
  }
  return mean(losses * g) / coverage;
}

Tensor selective_loss(const Tensor& losses, const Tensor& g,
                      const LossConfig& config) {
  config.validate();
  Tensor risk = empirical_selective_risk(losses, g);
  Tensor penalty = psi(config.coverage - empirical_coverage(g));
  return risk + config.lambda * penalty;
}

Tensor auxiliary_loss(const Tensor& h_losses) {
  if (h_losses.size() == 0) throw ContractError("auxiliary loss of no samples");
  return mean(h_losses);
}

Tensor total_loss(const Tensor& selective, const Tensor& auxiliary,
                  double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  return alpha * selective + (1.0 - alpha) * auxiliary;
}

}  // namespace selnet
