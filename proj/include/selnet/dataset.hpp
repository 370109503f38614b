#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selnet/preprocessing.hpp"
#include "selnet/task.hpp"
#include "selnet/tensor.hpp"

namespace selnet {

/// Row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  Matrix select_rows(std::span<const std::size_t> index) const;
  Tensor to_tensor() const { return Tensor::matrix(rows, cols, data); }
  bool operator==(const Matrix&) const = default;
};

struct Provenance {
  std::string source;
  std::vector<std::string> warnings;
  // Generator noise flags, one per row; empty for real data. Diagnostics
  // only: training never reads it.
  std::vector<std::uint8_t> noise;
};

/// Labeled samples. Labels are class indices (stored as doubles) for
/// classification and real targets for regression.
struct Dataset {
  Matrix features;
  std::vector<double> labels;
  Task task;
  std::vector<std::string> feature_names;
  std::optional<Normalization> normalization;
  Provenance provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t width() const { return features.cols; }
  Dataset subset(std::span<const std::size_t> index) const;
  /// Throws DataError on size mismatch, an empty set, non-finite values or
  /// invalid class labels.
  void validate() const;
};

struct CsvSchema {
  // Empty: every column except the target.
  std::vector<std::string> feature_columns;
  // Column name (or zero-based index without a header); empty: last column.
  std::string target_column;
  bool header = true;
  Task task = Task::regression();
};

/// Comma-separated, '.' decimal. Classification labels must be integral;
/// a zero class count in the schema is inferred as max label + 1.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

/// Fits per-feature z-score statistics on `data` (and target statistics when
/// `standardize_targets` holds for regression), dropping constant features
/// with a provenance warning.
Normalization fit_normalization(const Dataset& data, bool standardize_targets);
/// Applies fitted statistics verbatim.
Dataset apply_normalization(const Dataset& data, const Normalization& stats);
Matrix apply_normalization(const Matrix& raw, const Normalization& stats);
/// Fit on `data` when `stats` is empty, then apply.
Dataset standardize(const Dataset& data,
                    const std::optional<Normalization>& stats = std::nullopt,
                    bool standardize_targets = false);

/// Gaussian clusters on a circle in the first two dimensions plus a noise
/// disc at the origin whose labels are uniformly random.
struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t samples = 1000;
  std::size_t classes = 4;
  std::size_t dims = 8;
  double noise_fraction = 0.2;
  double cluster_radius = 4.0;
  double cluster_std = 0.7;
  double noise_radius = 1.5;

  void validate() const;
  std::string describe() const;
};

Dataset synth_classification(const SyntheticSpec& spec);

struct SplitSpec {
  double train = 0.6;
  double calibration = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
  bool stratified = false;

  void validate() const;
};

struct DataSplit {
  Dataset train;
  Dataset calibration;
  Dataset test;
  std::array<std::vector<std::size_t>, 3> index;
};

/// Floor-then-distribute sizes for `count` items: floor(f_i * count) each,
/// remainder handed out by largest fractional part.
std::array<std::size_t, 3> split_sizes(std::size_t count,
                                       const SplitSpec& spec);
DataSplit split(const Dataset& data, const SplitSpec& spec);

}  // namespace selnet
