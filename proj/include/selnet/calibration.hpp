#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "selnet/model.hpp"

namespace selnet {

struct CalibrationResult {
  double threshold = 0.5;  // tau
  double target_coverage = 1.0;
  std::size_t validation_size = 0;
  double delta = 0.05;
  double epsilon = 0.0;
  double achieved_coverage = 0.0;

  bool operator==(const CalibrationResult&) const = default;
};

/// Nearest-rank 100(1-c) percentile: sort ascending and take the value at
/// 1-based rank floor(n(1-c)) + 1. With the rule score >= tau and distinct
/// values, the accepted fraction is the smallest achievable one >= c.
double select_threshold(std::span<const double> scores, double coverage);

/// sqrt(ln(2/delta) / (2n)): with probability >= 1 - delta the coverage of
/// a threshold calibrated on n i.i.d. samples lies within c +/- epsilon.
double hoeffding_epsilon(std::size_t n, double delta);

/// Fraction of scores >= threshold.
double coverage_at(std::span<const double> scores, double threshold);

/// Decision rule (f, g_tau): f(x) where g(x) >= tau, abstain otherwise.
std::vector<std::optional<double>> calibrated_predict(SelectiveNet& model,
                                                      double threshold,
                                                      const Tensor& x);

/// Evaluates g on unlabeled validation inputs in eval mode and fits tau.
CalibrationResult calibrate(SelectiveNet& model, const Tensor& inputs,
                            double coverage, double delta);
/// Same, from precomputed selection scores.
CalibrationResult calibrate_scores(std::span<const double> scores,
                                   double coverage, double delta);

}  // namespace selnet
