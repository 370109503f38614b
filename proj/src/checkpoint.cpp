#include "selnet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "selnet/error.hpp"

namespace selnet {
namespace {

constexpr std::string_view kMagic = "SELNET-CHECKPOINT";
constexpr std::string_view kHeaderEnd = "end\n";

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string hex_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += hex(values[i]);
  }
  return out;
}

double parse_hex(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw IntegrityError("malformed number '" + text + "' in checkpoint header");
  }
  return v;
}

std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i]))
         << (8 * i);
  }
  return v;
}

class Header {
 public:
  explicit Header(std::map<std::string, std::string> fields)
      : fields_(std::move(fields)) {}

  const std::string& get(const std::string& key) const {
    const auto it = fields_.find(key);
    if (it == fields_.end()) {
      throw IntegrityError("checkpoint header lacks '" + key + "'");
    }
    return it->second;
  }
  bool has(const std::string& key) const { return fields_.contains(key); }
  std::size_t size(const std::string& key) const {
    try {
      return static_cast<std::size_t>(std::stoull(get(key)));
    } catch (const std::logic_error&) {
      throw IntegrityError("malformed integer for '" + key + "'");
    }
  }
  bool flag(const std::string& key) const { return get(key) == "1"; }
  double number(const std::string& key) const { return parse_hex(get(key)); }

 private:
  std::map<std::string, std::string> fields_;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_model(const SelectiveNet& source_model,
                            const std::optional<CalibrationResult>& calibration,
                            bool include_auxiliary, const std::string& source) {
  SelectiveNet model = source_model;
  if (!include_auxiliary) model.drop_auxiliary_head();
  const ArchitectureConfig& config = model.config();

  std::ostringstream h;
  h << kMagic << '\n';
  h << "version=" << kCheckpointVersion << '\n';
  h << "task=" << to_string(config.task) << '\n';
  h << "input_width=" << config.input_width << '\n';
  h << "body.count=" << config.body.size() << '\n';
  for (std::size_t i = 0; i < config.body.size(); ++i) {
    const auto& layer = config.body[i];
    const std::string prefix = "body." + std::to_string(i) + ".";
    h << prefix << "width=" << layer.width << '\n';
    h << prefix << "activation="
      << (layer.activation == Activation::Relu ? "relu" : "linear") << '\n';
    h << prefix << "batch_norm=" << (layer.batch_norm ? 1 : 0) << '\n';
    h << prefix << "dropout=" << (layer.dropout ? hex(*layer.dropout) : "none")
      << '\n';
  }
  h << "selection_head=" << (config.selection_head ? 1 : 0) << '\n';
  h << "selection_hidden=" << config.selection_hidden << '\n';
  h << "selection_batch_norm=" << (config.selection_batch_norm ? 1 : 0) << '\n';
  h << "auxiliary_head=" << (config.auxiliary_head ? 1 : 0) << '\n';
  h << "trained_coverage="
    << (model.trained_coverage() ? hex(*model.trained_coverage()) : "none")
    << '\n';
  if (const auto& n = model.normalization()) {
    h << "normalization=1\n";
    h << "normalization.raw_width=" << n->raw_width << '\n';
    h << "normalization.kept=";
    for (std::size_t i = 0; i < n->kept_features.size(); ++i) {
      h << (i ? " " : "") << n->kept_features[i];
    }
    h << '\n';
    h << "normalization.mean=" << hex_list(n->feature_mean) << '\n';
    h << "normalization.std=" << hex_list(n->feature_std) << '\n';
    h << "normalization.targets_standardized=" << (n->targets_standardized ? 1 : 0)
      << '\n';
    h << "normalization.target_mean=" << hex(n->target_mean) << '\n';
    h << "normalization.target_std=" << hex(n->target_std) << '\n';
  } else {
    h << "normalization=0\n";
  }
  if (calibration) {
    h << "calibration=1\n";
    h << "calibration.threshold=" << hex(calibration->threshold) << '\n';
    h << "calibration.target_coverage=" << hex(calibration->target_coverage)
      << '\n';
    h << "calibration.validation_size=" << calibration->validation_size << '\n';
    h << "calibration.delta=" << hex(calibration->delta) << '\n';
    h << "calibration.epsilon=" << hex(calibration->epsilon) << '\n';
    h << "calibration.achieved_coverage="
      << hex(calibration->achieved_coverage) << '\n';
  } else {
    h << "calibration=0\n";
  }
  std::string clean_source = source;
  for (char& c : clean_source) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  h << "source=" << clean_source << '\n';

  std::vector<double> payload;
  for (auto span : model.state()) payload.insert(payload.end(), span.begin(), span.end());
  h << "payload.count=" << payload.size() << '\n';
  h << kHeaderEnd;

  std::string bytes = h.str();
  bytes.reserve(bytes.size() + 8 * payload.size() + 8);
  for (double v : payload) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
  put_u64(bytes, fnv1a64(bytes));
  return bytes;
}

Checkpoint deserialize_model(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    throw IntegrityError("not a selnet checkpoint");
  }
  const std::size_t header_end = bytes.find("\nend\n");
  if (header_end == std::string_view::npos) {
    throw IntegrityError("checkpoint header is truncated");
  }
  const std::size_t payload_start = header_end + 5;

  std::map<std::string, std::string> fields;
  std::istringstream lines{std::string(bytes.substr(0, header_end))};
  std::string line;
  std::getline(lines, line);  // magic
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IntegrityError("malformed header line");
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const Header header(std::move(fields));
  const std::string& version = header.get("version");
  if (version != std::to_string(kCheckpointVersion)) {
    throw VersionError("checkpoint format version " + version +
                       " is not supported by this reader (version " +
                       std::to_string(kCheckpointVersion) + ")");
  }

  const std::size_t count = header.size("payload.count");
  if (bytes.size() != payload_start + 8 * count + 8) {
    throw IntegrityError("checkpoint is truncated or has trailing bytes");
  }
  const std::uint64_t stored = get_u64(bytes, bytes.size() - 8);
  if (stored != fnv1a64(bytes.substr(0, bytes.size() - 8))) {
    throw IntegrityError("checkpoint checksum mismatch");
  }

  ArchitectureConfig config;
  config.task = parse_task(header.get("task"));
  config.input_width = header.size("input_width");
  const std::size_t layers = header.size("body.count");
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string prefix = "body." + std::to_string(i) + ".";
    BodyLayerConfig layer;
    layer.width = header.size(prefix + "width");
    layer.activation = header.get(prefix + "activation") == "relu"
                           ? Activation::Relu
                           : Activation::Linear;
    layer.batch_norm = header.flag(prefix + "batch_norm");
    if (header.get(prefix + "dropout") != "none") {
      layer.dropout = header.number(prefix + "dropout");
    }
    config.body.push_back(layer);
  }
  config.selection_head = header.flag("selection_head");
  config.selection_hidden = header.size("selection_hidden");
  config.selection_batch_norm = header.flag("selection_batch_norm");
  config.auxiliary_head = header.flag("auxiliary_head");

  Checkpoint out{SelectiveNet::build(config, 0), std::nullopt,
                 header.get("source")};
  if (header.get("trained_coverage") != "none") {
    out.model.set_trained_coverage(header.number("trained_coverage"));
  }
  if (header.flag("normalization")) {
    Normalization n;
    n.raw_width = header.size("normalization.raw_width");
    for (const auto& w : words(header.get("normalization.kept"))) {
      n.kept_features.push_back(static_cast<std::size_t>(std::stoull(w)));
    }
    for (const auto& w : words(header.get("normalization.mean"))) {
      n.feature_mean.push_back(parse_hex(w));
    }
    for (const auto& w : words(header.get("normalization.std"))) {
      n.feature_std.push_back(parse_hex(w));
    }
    n.targets_standardized = header.flag("normalization.targets_standardized");
    n.target_mean = header.number("normalization.target_mean");
    n.target_std = header.number("normalization.target_std");
    out.model.set_normalization(std::move(n));
  }
  if (header.flag("calibration")) {
    CalibrationResult c;
    c.threshold = header.number("calibration.threshold");
    c.target_coverage = header.number("calibration.target_coverage");
    c.validation_size = header.size("calibration.validation_size");
    c.delta = header.number("calibration.delta");
    c.epsilon = header.number("calibration.epsilon");
    c.achieved_coverage = header.number("calibration.achieved_coverage");
    out.calibration = c;
  }

  auto state = out.model.state();
  std::size_t expected = 0;
  for (auto span : state) expected += span.size();
  if (expected != count) {
    throw IntegrityError("checkpoint holds " + std::to_string(count) +
                         " values but the architecture needs " +
                         std::to_string(expected));
  }
  std::size_t at = payload_start;
  for (auto span : state) {
    for (double& v : span) {
      v = std::bit_cast<double>(get_u64(bytes, at));
      at += 8;
    }
  }
  return out;
}

void save_model(const std::string& path, const SelectiveNet& model,
                const std::optional<CalibrationResult>& calibration,
                bool include_auxiliary, const std::string& source) {
  const std::string bytes =
      serialize_model(model, calibration, include_auxiliary, source);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

Checkpoint load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace selnet
