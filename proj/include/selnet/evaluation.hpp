#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selnet/model.hpp"
#include "selnet/task.hpp"

namespace selnet {

/// Hard-mask selective metrics. `risk` is the 0-1 error in percent for
/// classification and the mean squared error for regression; `risk_stderr`
/// is the standard error of that mean over the covered samples.
struct EvalReport {
  double target_coverage = 1.0;
  double coverage = 0.0;
  double risk = 0.0;
  double risk_stderr = 0.0;
  std::size_t covered = 0;
  std::size_t rejected = 0;
  std::size_t total = 0;
};

/// Mean and standard error (sample std / sqrt(n)) across seeds.
struct Aggregate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
};

Aggregate aggregate(std::span<const double> values);

enum class ScoreSource { Selection, SoftmaxResponse, McDropout };

std::string to_string(ScoreSource source);
ScoreSource parse_score_source(const std::string& text);

/// Per-sample confidence; higher means more confident.
struct ConfidenceScore {
  ScoreSource source = ScoreSource::Selection;
  std::vector<double> values;
};

/// Throws DataError when nothing is accepted.
EvalReport selective_metrics(std::span<const double> predictions,
                             std::span<const double> labels,
                             std::span<const std::uint8_t> accept,
                             const Task& task, double target_coverage = 1.0);

/// Maximum softmax probability of each row of [m x k] probabilities.
ConfidenceScore sr_confidence(const Tensor& probabilities);

/// Negative variance over `passes` stochastic forward passes with every
/// dropout layer forced active at rate `p`. Classification uses the
/// probability of the class with the highest mean probability; regression
/// uses the scalar output. Sample i draws its masks from a stream derived
/// from (seed, i), so results do not depend on batching.
ConfidenceScore mc_dropout_confidence(SelectiveNet& model, const Tensor& inputs,
                                      std::size_t passes, double p,
                                      std::uint64_t seed);

/// Nearest-rank threshold, identical to calibration.
double threshold_for_coverage(std::span<const double> scores, double coverage);

/// Threshold used when targeting coverage c on held-out data: the
/// nearest-rank threshold for c < 1 and -infinity (accept all) for c = 1.
double threshold_for_target(std::span<const double> calibration_scores,
                            double coverage);

std::vector<std::uint8_t> accept_mask(std::span<const double> scores,
                                      double threshold);

/// Scores, predictions (class index or value in original units) and labels
/// of one data split.
struct ScoredSplit {
  std::vector<double> scores;
  std::vector<double> predictions;
  std::vector<double> labels;
};

struct CurvePoint {
  double target_coverage = 0.0;
  double threshold = 0.0;
  double achieved_coverage = 0.0;
  double risk = 0.0;
  double risk_stderr = 0.0;
};

/// For each grid value: threshold_for_target on the calibration split,
/// then selective_metrics on the test split.
std::vector<CurvePoint> risk_coverage_curve(const ScoredSplit& calibration,
                                            const ScoredSplit& test,
                                            std::span<const double> coverages,
                                            const Task& task);

/// Held-out splits of one trained model.
struct ScoredModel {
  ScoredSplit calibration;
  ScoredSplit test;
};

/// Entry (i, j): selective test risk of model i calibrated to coverages[j].
std::vector<std::vector<double>> cross_calibration_grid(
    std::span<const ScoredModel> models, std::span<const double> coverages,
    const Task& task);

/// 100 * (baseline - selnet) / baseline; empty when the baseline risk is 0.
std::optional<double> improvement(double baseline_risk, double selnet_risk);

struct CompareRow {
  double coverage = 1.0;
  Aggregate selnet;
  std::vector<std::optional<Aggregate>> baselines;
  std::vector<std::optional<double>> improvements;
};

/// Rows matching `coverages`; `baselines[b][i]` is baseline b at coverage i
/// (empty when a baseline does not apply to the task).
std::vector<CompareRow> compare_report(
    std::span<const double> coverages, std::span<const Aggregate> selnet,
    std::span<const std::vector<std::optional<Aggregate>>> baselines);

// CSV rendering. Every document starts with '#' comment lines carrying
// `provenance`; numbers use fixed notation with '.' decimals.
std::string curve_csv(std::span<const CurvePoint> curve,
                      const std::string& provenance);
std::string grid_csv(std::span<const double> train_coverages,
                     std::span<const double> calibration_coverages,
                     const std::vector<std::vector<double>>& grid,
                     const std::string& provenance);
std::string compare_csv(std::span<const CompareRow> rows,
                        std::span<const std::string> baseline_names,
                        const std::string& provenance);

}  // namespace selnet
