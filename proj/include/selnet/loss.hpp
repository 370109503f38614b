#pragma once

#include <span>

#include "selnet/tensor.hpp"

namespace selnet {

enum class TaskLoss { CrossEntropy, Squared };

struct LossConfig {
  double coverage = 1.0;  // target coverage c in (0, 1]
  double lambda = 32.0;   // penalty weight
  double alpha = 0.5;     // weight of the selective loss vs. the auxiliary loss
  TaskLoss task_loss = TaskLoss::Squared;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Per-sample task loss. Cross-entropy takes [m x k] probabilities and class
/// indices, clamping the true-class probability at 1e-12; squared loss takes
/// [m] predictions and real targets.
Tensor task_loss(TaskLoss kind, const Tensor& prediction,
                 std::span<const double> labels);

/// max(0, a)^2.
double psi(double a);
Tensor psi(const Tensor& a);

/// Mean of the (soft) selection values.
Tensor empirical_coverage(const Tensor& g);

/// sum(loss * g) / sum(g), i.e. the coverage-normalized weighted mean loss.
/// Throws DegenerateCoverageError when the coverage is zero.
Tensor empirical_selective_risk(const Tensor& losses, const Tensor& g);

/// r(f, g) + lambda * psi(c - coverage(g)).
Tensor selective_loss(const Tensor& losses, const Tensor& g,
                      const LossConfig& config);

/// Plain mean of the auxiliary head's per-sample losses.
Tensor auxiliary_loss(const Tensor& h_losses);

/// alpha * selective + (1 - alpha) * auxiliary.
Tensor total_loss(const Tensor& selective, const Tensor& auxiliary,
                  double alpha);

}  // namespace selnet
