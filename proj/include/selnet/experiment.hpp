#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "selnet/config.hpp"
#include "selnet/dataset.hpp"
#include "selnet/evaluation.hpp"
#include "selnet/model.hpp"
#include "selnet/train.hpp"

namespace selnet {

inline constexpr int kCsvFormatVersion = 1;

using ProgressFn = std::function<void(const std::string&)>;

/// One replicate's data: raw splits plus the training split standardized
/// with statistics fitted on it alone.
struct PreparedData {
  DataSplit raw;
  Dataset train;
  Normalization normalization;
  ArchitectureConfig architecture;
};

/// The dataset named by the config. Synthetic data draws from a generator
/// seed derived from the configured seed and `seed`.
Dataset load_data(const RunConfig& config, std::uint64_t seed);
/// Loads, splits (split seed derived from `seed`) and standardizes.
PreparedData prepare_data(const RunConfig& config, std::uint64_t seed);

TrainConfig train_config_for(const RunConfig& config, double coverage,
                             std::uint64_t seed);
SelectiveNet train_selectivenet(const RunConfig& config,
                                const PreparedData& data, double coverage,
                                std::uint64_t seed,
                                TrainHistory* history = nullptr);
/// Body and f only, trained at full coverage on the plain task loss.
SelectiveNet train_baseline(const RunConfig& config, const PreparedData& data,
                            std::uint64_t seed,
                            TrainHistory* history = nullptr);

/// Raw features mapped through the model's stored normalization.
Tensor model_inputs(const SelectiveNet& model, const Matrix& raw);

/// Eval-mode predictions in original units (class index for
/// classification) and raw labels; `scores` is left empty.
ScoredSplit predict_split(SelectiveNet& model, const Dataset& raw,
                          HeadOutputs* outputs = nullptr);

/// Eval-mode predictions in original units (class index for
/// classification), raw labels, and the requested confidence scores.
ScoredSplit score_split(SelectiveNet& model, const Dataset& raw,
                        ScoreSource source, const McDropoutConfig& mc,
                        std::uint64_t seed);

struct CompareResult {
  std::vector<double> coverages;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> baseline_names;
  std::vector<CompareRow> rows;
  // Test risks indexed [seed][coverage].
  std::vector<std::vector<double>> selnet_risk;
  // Full-coverage test risk of the SelectiveNet trained at each coverage.
  std::vector<std::vector<double>> selnet_full_risk;
  std::vector<std::vector<double>> selnet_achieved_coverage;
  // Indexed [baseline][seed][coverage]; empty for a baseline that does not
  // apply to the task.
  std::vector<std::vector<std::vector<double>>> baseline_risk;
  std::string csv;
};

/// Per seed: one SelectiveNet per coverage (threshold fitted on the
/// calibration split, risk on the test split) and one full-coverage
/// baseline scored by MC-dropout and, for classification, SR.
CompareResult run_compare(const RunConfig& config,
                          std::span<const double> coverages,
                          std::span<const std::uint64_t> seeds,
                          const ProgressFn& progress = {});

struct GridResult {
  std::vector<double> train_coverages;
  std::vector<double> calibration_coverages;
  // [seed][train][calibration]
  std::vector<std::vector<std::vector<double>>> per_seed;
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> standard_error;
  std::string csv;
};

GridResult run_grid(const RunConfig& config,
                    std::span<const double> train_coverages,
                    std::span<const double> calibration_coverages,
                    std::span<const std::uint64_t> seeds,
                    const ProgressFn& progress = {});

/// "# "-less provenance lines shared by every CSV writer.
std::string provenance_text(const std::string& command,
                            const std::string& config_hash,
                            std::span<const std::uint64_t> seeds);

std::string join_numbers(std::span<const double> values);

}  // namespace selnet
