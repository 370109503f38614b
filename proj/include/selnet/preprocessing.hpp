#pragma once

#include <cstddef>
#include <vector>

namespace selnet {

/// Per-feature z-score statistics fitted on a training split, plus the
/// optional target transform used for regression.
struct Normalization {
  std::size_t raw_width = 0;
  // Raw column indices that survive (constant columns are dropped).
  std::vector<std::size_t> kept_features;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  bool targets_standardized = false;
  double target_mean = 0.0;
  double target_std = 1.0;

  double target_to_model(double y) const {
    return targets_standardized ? (y - target_mean) / target_std : y;
  }
  double target_to_original(double y) const {
    return targets_standardized ? y * target_std + target_mean : y;
  }
  bool operator==(const Normalization&) const = default;
};

}  // namespace selnet
