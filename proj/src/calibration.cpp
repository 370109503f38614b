#include "selnet/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "selnet/error.hpp"

namespace selnet {

double select_threshold(std::span<const double> scores, double coverage) {
  if (scores.empty()) throw ContractError("threshold selection on no scores");
  if (!(coverage > 0.0 && coverage <= 1.0)) {
    throw ConfigError("target coverage must lie in (0, 1], got " +
                      std::to_string(coverage));
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // The tolerance keeps products such as 10 * (1 - 0.8) from rounding down.
  auto rank = static_cast<std::size_t>(std::floor(n * (1.0 - coverage) + 1e-9)) + 1;
  rank = std::min(rank, sorted.size());
  return sorted[rank - 1];
}

double hoeffding_epsilon(std::size_t n, double delta) {
  if (n == 0) throw ContractError("Hoeffding bound needs n >= 1");
  if (!(delta > 0.0 && delta < 2.0)) {
    throw DomainError("delta must lie in (0, 2), got " + std::to_string(delta));
  }
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

double coverage_at(std::span<const double> scores, double threshold) {
  if (scores.empty()) throw ContractError("coverage of no scores");
  const auto accepted = std::count_if(scores.begin(), scores.end(),
                                      [&](double s) { return s >= threshold; });
  return static_cast<double>(accepted) / static_cast<double>(scores.size());
}

std::vector<std::optional<double>> calibrated_predict(SelectiveNet& model,
                                                      double threshold,
                                                      const Tensor& x) {
  return model.predict(x, threshold);
}

CalibrationResult calibrate_scores(std::span<const double> scores,
                                   double coverage, double delta) {
  CalibrationResult result;
  result.threshold = select_threshold(scores, coverage);
  result.target_coverage = coverage;
  result.validation_size = scores.size();
  result.delta = delta;
  result.epsilon = hoeffding_epsilon(scores.size(), delta);
  result.achieved_coverage = coverage_at(scores, result.threshold);
  return result;
}

CalibrationResult calibrate(SelectiveNet& model, const Tensor& inputs,
                            double coverage, double delta) {
  if (!model.has_selection_head()) {
    throw ContractError("calibration needs a model with a selection head");
  }
  if (inputs.rank() != 2 || inputs.dim(0) == 0) {
    throw ContractError("calibration needs a non-empty validation set");
  }
  const HeadOutputs out = model.forward(inputs, Mode::Eval);
  return calibrate_scores(out.g.values(), coverage, delta);
}

}  // namespace selnet
