#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "selnet/calibration.hpp"
#include "selnet/model.hpp"

namespace selnet {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  SelectiveNet model;
  std::optional<CalibrationResult> calibration;
  // Dataset the model was trained on, when known.
  std::string source;
};

/// Framed binary checkpoint: a UTF-8 key=value header (format version,
/// architecture, task, trained coverage, normalization, calibration; floats
/// as hex literals), then every state value as little-endian IEEE-754
/// doubles in declaration order, then a 64-bit FNV-1a checksum of all
/// preceding bytes. `include_auxiliary = false` writes an inference
/// artifact without the h head.
std::string serialize_model(const SelectiveNet& model,
                            const std::optional<CalibrationResult>& calibration,
                            bool include_auxiliary = true,
                            const std::string& source = "");

/// Throws VersionError for another format version and IntegrityError for a
/// truncated or corrupted file; nothing is returned on failure.
Checkpoint deserialize_model(std::string_view bytes);

void save_model(const std::string& path, const SelectiveNet& model,
                const std::optional<CalibrationResult>& calibration,
                bool include_auxiliary = true, const std::string& source = "");
Checkpoint load_model(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace selnet
