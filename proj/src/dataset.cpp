#include "selnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "selnet/error.hpp"
#include "selnet/rng.hpp"

namespace selnet {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::size_t resolve_column(const std::string& name,
                           const std::vector<std::string>& header,
                           bool has_header) {
  if (has_header) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  }
  std::size_t index = 0;
  auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), index);
  if (ec == std::errc() && ptr == name.data() + name.size() &&
      index < header.size()) {
    return index;
  }
  throw DataError("column '" + name + "' not found");
}

void check_label(double y, const Task& task, std::size_t row) {
  if (!std::isfinite(y)) {
    throw DataError("non-finite label at row " + std::to_string(row));
  }
  if (!task.is_classification()) return;
  if (y < 0.0 || y != std::floor(y) ||
      y >= static_cast<double>(task.num_classes)) {
    throw DataError("label " + std::to_string(y) + " at row " +
                    std::to_string(row) + " is not a class index below " +
                    std::to_string(task.num_classes));
  }
}

}  // namespace

Matrix Matrix::select_rows(std::span<const std::size_t> index) const {
  Matrix out(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) {
      throw DimensionError("row " + std::to_string(index[i]) +
                           " out of range for " + std::to_string(rows) +
                           " rows");
    }
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(index[i] * cols),
                cols, out.data.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> index) const {
  Dataset out;
  out.features = features.select_rows(index);
  out.labels.reserve(index.size());
  for (std::size_t i : index) out.labels.push_back(labels.at(i));
  out.task = task;
  out.feature_names = feature_names;
  out.normalization = normalization;
  out.provenance.source = provenance.source;
  out.provenance.warnings = provenance.warnings;
  if (!provenance.noise.empty()) {
    for (std::size_t i : index) out.provenance.noise.push_back(provenance.noise.at(i));
  }
  return out;
}

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset is empty");
  if (features.rows != labels.size() ||
      features.data.size() != features.rows * features.cols) {
    throw DataError("dataset has " + std::to_string(features.rows) +
                    " feature rows but " + std::to_string(labels.size()) +
                    " labels");
  }
  for (std::size_t i = 0; i < features.data.size(); ++i) {
    if (!std::isfinite(features.data[i])) {
      throw DataError("non-finite feature at row " +
                      std::to_string(i / std::max<std::size_t>(features.cols, 1)));
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) check_label(labels[i], task, i);
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (schema.header && header.empty() && rows.empty()) {
      header = split_commas(line);
      continue;
    }
    rows.push_back(split_commas(line));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw DataError("'" + path + "' contains no data rows");

  const std::size_t width = schema.header ? header.size() : rows.front().size();
  if (!schema.header) {
    header.resize(width);
    for (std::size_t j = 0; j < width; ++j) header[j] = std::to_string(j);
  }
  const std::size_t target =
      schema.target_column.empty()
          ? width - 1
          : resolve_column(schema.target_column, header, schema.header);
  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t j = 0; j < width; ++j) {
      if (j != target) feature_cols.push_back(j);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      feature_cols.push_back(resolve_column(name, header, schema.header));
    }
  }
  if (feature_cols.empty()) throw DataError("no feature columns selected");

  Dataset data;
  data.task = schema.task;
  data.provenance.source = path;
  for (std::size_t j : feature_cols) data.feature_names.push_back(header[j]);
  data.features = Matrix(rows.size(), feature_cols.size());
  data.labels.resize(rows.size());

  auto cell = [&](std::size_t r, std::size_t c) {
    double v = 0.0;
    if (!parse_double(rows[r][c], v)) {
      throw ParseError("'" + path + "' line " + std::to_string(line_numbers[r]) +
                       ", column " + std::to_string(c + 1) + " ('" + header[c] +
                       "'): cannot parse '" + rows[r][c] + "' as a number");
    }
    return v;
  };
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw ParseError("'" + path + "' line " + std::to_string(line_numbers[r]) +
                       " has " + std::to_string(rows[r].size()) +
                       " columns, expected " + std::to_string(width));
    }
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      data.features(r, j) = cell(r, feature_cols[j]);
    }
    data.labels[r] = cell(r, target);
  }

  if (data.task.is_classification() && data.task.num_classes == 0) {
    double top = 0.0;
    for (double y : data.labels) {
      if (y < 0.0 || y != std::floor(y)) {
        throw DataError("classification label " + std::to_string(y) +
                        " is not a non-negative integer");
      }
      top = std::max(top, y);
    }
    data.task.num_classes = static_cast<std::size_t>(top) + 1;
  }
  data.validate();
  return data;
}

Normalization fit_normalization(const Dataset& data, bool standardize_targets) {
  data.validate();
  const std::size_t m = data.size();
  const std::size_t d = data.width();
  Normalization stats;
  stats.raw_width = d;
  for (std::size_t j = 0; j < d; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += data.features(i, j);
    const double mu = total / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dev = data.features(i, j) - mu;
      ss += dev * dev;
    }
    const double sd = std::sqrt(ss / static_cast<double>(m));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) continue;
    stats.kept_features.push_back(j);
    stats.feature_mean.push_back(mu);
    stats.feature_std.push_back(sd);
  }
  if (stats.kept_features.empty()) {
    throw DataError("every feature is constant; nothing to learn from");
  }
  if (standardize_targets && !data.task.is_classification()) {
    double total = 0.0;
    for (double y : data.labels) total += y;
    const double mu = total / static_cast<double>(m);
    double ss = 0.0;
    for (double y : data.labels) ss += (y - mu) * (y - mu);
    const double sd = std::sqrt(ss / static_cast<double>(m));
    if (sd > 0.0) {
      stats.targets_standardized = true;
      stats.target_mean = mu;
      stats.target_std = sd;
    }
  }
  return stats;
}

Matrix apply_normalization(const Matrix& raw, const Normalization& stats) {
  if (raw.cols != stats.raw_width) {
    throw DimensionError("normalization fitted on " +
                         std::to_string(stats.raw_width) +
                         " features applied to " + std::to_string(raw.cols));
  }
  Matrix out(raw.rows, stats.kept_features.size());
  for (std::size_t i = 0; i < raw.rows; ++i) {
    for (std::size_t j = 0; j < stats.kept_features.size(); ++j) {
      out(i, j) = (raw(i, stats.kept_features[j]) - stats.feature_mean[j]) /
                  stats.feature_std[j];
    }
  }
  return out;
}

Dataset apply_normalization(const Dataset& data, const Normalization& stats) {
  Dataset out;
  out.features = apply_normalization(data.features, stats);
  out.labels = data.labels;
  if (stats.targets_standardized && !data.task.is_classification()) {
    for (double& y : out.labels) y = stats.target_to_model(y);
  }
  out.task = data.task;
  for (std::size_t j : stats.kept_features) {
    if (j < data.feature_names.size()) out.feature_names.push_back(data.feature_names[j]);
  }
  out.normalization = stats;
  out.provenance = data.provenance;
  if (stats.kept_features.size() != stats.raw_width) {
    std::ostringstream note;
    note << "dropped " << stats.raw_width - stats.kept_features.size()
         << " constant feature(s)";
    out.provenance.warnings.push_back(note.str());
  }
  return out;
}

Dataset standardize(const Dataset& data,
                    const std::optional<Normalization>& stats,
                    bool standardize_targets) {
  return apply_normalization(
      data, stats ? *stats : fit_normalization(data, standardize_targets));
}

void SyntheticSpec::validate() const {
  if (!(noise_fraction >= 0.0 && noise_fraction < 0.5)) {
    throw ConfigError("noise fraction must lie in [0, 0.5)");
  }
  if (classes < 2) throw ConfigError("synthetic data needs >= 2 classes");
  if (dims < 2) throw ConfigError("synthetic data needs >= 2 dimensions");
  if (samples == 0) throw ConfigError("synthetic data needs >= 1 sample");
  if (!(cluster_std > 0.0 && cluster_radius > 0.0 && noise_radius > 0.0)) {
    throw ConfigError("synthetic geometry parameters must be positive");
  }
}

std::string SyntheticSpec::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << "synthetic seed=" << seed << " samples=" << samples
      << " classes=" << classes << " dims=" << dims
      << " noise_fraction=" << noise_fraction
      << " cluster_radius=" << cluster_radius
      << " cluster_std=" << cluster_std << " noise_radius=" << noise_radius;
  return out.str();
}

Dataset synth_classification(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, 0x5157);
  const std::size_t m = spec.samples;
  const auto noisy = static_cast<std::size_t>(
      std::floor(spec.noise_fraction * static_cast<double>(m) + 0.5));
  std::vector<std::uint8_t> flags(m, 0);
  std::fill_n(flags.begin(), noisy, std::uint8_t{1});
  rng.shuffle(flags);

  Dataset data;
  data.task = Task::classification(spec.classes);
  data.features = Matrix(m, spec.dims);
  data.labels.resize(m);
  data.provenance.source = spec.describe();
  data.provenance.noise = flags;
  for (std::size_t j = 0; j < spec.dims; ++j) {
    data.feature_names.push_back("x" + std::to_string(j));
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto label = rng.below(spec.classes);
    data.labels[i] = static_cast<double>(label);
    if (flags[i]) {
      const double r = spec.noise_radius * std::sqrt(rng.uniform());
      const double angle = 2.0 * std::numbers::pi * rng.uniform();
      data.features(i, 0) = r * std::cos(angle);
      data.features(i, 1) = r * std::sin(angle);
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(label) /
                           static_cast<double>(spec.classes);
      data.features(i, 0) =
          spec.cluster_radius * std::cos(angle) + spec.cluster_std * rng.normal();
      data.features(i, 1) =
          spec.cluster_radius * std::sin(angle) + spec.cluster_std * rng.normal();
    }
    for (std::size_t j = 2; j < spec.dims; ++j) {
      data.features(i, j) = spec.cluster_std * rng.normal();
    }
  }
  return data;
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && calibration > 0.0 && test > 0.0)) {
    throw ConfigError("every split fraction must be positive");
  }
  if (std::abs(train + calibration + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

std::array<std::size_t, 3> split_sizes(std::size_t count,
                                       const SplitSpec& spec) {
  spec.validate();
  const std::array<double, 3> fractions{spec.train, spec.calibration, spec.test};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = fractions[s] * static_cast<double>(count);
    // The tolerance absorbs representation error such as 0.6 * 1030.
    sizes[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[s] = exact - static_cast<double>(sizes[s]);
    assigned += sizes[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t i = 0; assigned < count; ++i, ++assigned) {
    ++sizes[order[i % 3]];
  }
  return sizes;
}

DataSplit split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  data.validate();
  if (spec.stratified && !data.task.is_classification()) {
    throw ConfigError("stratified splits apply to classification only");
  }
  Rng rng(spec.seed, 0x5011);
  DataSplit out;
  auto assign = [&](std::vector<std::size_t> pool) {
    rng.shuffle(pool);
    const auto sizes = split_sizes(pool.size(), spec);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      out.index[s].insert(out.index[s].end(),
                          pool.begin() + static_cast<std::ptrdiff_t>(offset),
                          pool.begin() + static_cast<std::ptrdiff_t>(offset + sizes[s]));
      offset += sizes[s];
    }
  };
  if (spec.stratified) {
    std::vector<std::vector<std::size_t>> by_class(data.task.num_classes);
    for (std::size_t i = 0; i < data.size(); ++i) {
      by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    for (auto& members : by_class) {
      if (!members.empty()) assign(std::move(members));
    }
  } else {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    assign(std::move(all));
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (out.index[s].empty()) {
      throw ConfigError("split " + std::to_string(s) + " would be empty for " +
                        std::to_string(data.size()) + " samples");
    }
    std::sort(out.index[s].begin(), out.index[s].end());
  }
  out.train = data.subset(out.index[0]);
  out.calibration = data.subset(out.index[1]);
  out.test = data.subset(out.index[2]);
  return out;
}

}  // namespace selnet
