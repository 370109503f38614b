#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "selnet/dataset.hpp"
#include "selnet/model.hpp"
#include "selnet/train.hpp"

namespace selnet {

struct DataSpec {
  // Exactly one of csv_path / synthetic is set.
  std::optional<std::string> csv_path;
  CsvSchema schema;
  std::optional<SyntheticSpec> synthetic;
  bool standardize_targets = true;
};

struct McDropoutConfig {
  double rate = 0.05;
  std::size_t passes = 200;
};

/// Everything a workflow needs. `architecture.input_width` and `task` are
/// filled in from the data once it is loaded.
struct RunConfig {
  DataSpec data;
  SplitSpec split;
  ArchitectureConfig architecture;
  TrainConfig train;
  double delta = 0.05;
  McDropoutConfig mc_dropout;
  std::vector<std::uint64_t> seeds{0};
  std::vector<double> coverages;
  std::string out_dir;
};

/// Parses a JSON config. Relative paths resolve against `base_dir`; a
/// referenced CSV must exist.
RunConfig parse_run_config(const nlohmann::json& doc,
                           const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

/// Canonical JSON of the effective configuration.
nlohmann::json to_json(const RunConfig& config);
/// Hex FNV-1a hash of the canonical JSON.
std::string config_hash(const RunConfig& config);

}  // namespace selnet
