#include "selnet/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "selnet/checkpoint.hpp"
#include "selnet/error.hpp"

namespace selnet {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

template <typename T>
T value_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "linear") return Activation::Linear;
  throw ConfigError("unknown activation '" + s + "'");
}

DataSpec parse_data(const json& j, const std::string& base_dir) {
  reject_unknown(j, {"csv", "target", "features", "header", "task", "synthetic",
                     "standardize_targets"},
                 "data");
  DataSpec spec;
  spec.standardize_targets = value_or(j, "standardize_targets", true);
  if (j.contains("synthetic") == j.contains("csv")) {
    throw ConfigError("data needs exactly one of 'csv' or 'synthetic'");
  }
  if (j.contains("csv")) {
    fs::path path = j.at("csv").get<std::string>();
    if (path.is_relative()) path = fs::path(base_dir) / path;
    if (!fs::exists(path)) {
      throw ConfigError("data file '" + path.string() + "' does not exist");
    }
    spec.csv_path = path.lexically_normal().string();
    spec.schema.target_column = value_or<std::string>(j, "target", "");
    spec.schema.feature_columns =
        value_or(j, "features", std::vector<std::string>{});
    spec.schema.header = value_or(j, "header", true);
    spec.schema.task = parse_task(value_or<std::string>(j, "task", "regression"));
  } else {
    const json& s = j.at("synthetic");
    reject_unknown(s, {"seed", "samples", "classes", "dims", "noise_fraction",
                       "cluster_radius", "cluster_std", "noise_radius"},
                   "data.synthetic");
    SyntheticSpec syn;
    syn.seed = value_or<std::uint64_t>(s, "seed", syn.seed);
    syn.samples = value_or<std::size_t>(s, "samples", syn.samples);
    syn.classes = value_or<std::size_t>(s, "classes", syn.classes);
    syn.dims = value_or<std::size_t>(s, "dims", syn.dims);
    syn.noise_fraction = value_or(s, "noise_fraction", syn.noise_fraction);
    syn.cluster_radius = value_or(s, "cluster_radius", syn.cluster_radius);
    syn.cluster_std = value_or(s, "cluster_std", syn.cluster_std);
    syn.noise_radius = value_or(s, "noise_radius", syn.noise_radius);
    syn.validate();
    spec.synthetic = syn;
  }
  return spec;
}

ArchitectureConfig parse_model(const json& j) {
  reject_unknown(j, {"body", "selection_hidden", "selection_batch_norm",
                     "auxiliary_head"},
                 "model");
  ArchitectureConfig a;
  if (!j.contains("body") || !j.at("body").is_array()) {
    throw ConfigError("model.body must be a list of layers");
  }
  for (const auto& layer : j.at("body")) {
    reject_unknown(layer, {"width", "activation", "batch_norm", "dropout"},
                   "model.body[]");
    BodyLayerConfig b;
    b.width = value_or<std::size_t>(layer, "width", 0);
    b.activation = parse_activation(value_or<std::string>(layer, "activation", "relu"));
    b.batch_norm = value_or(layer, "batch_norm", true);
    if (layer.contains("dropout")) b.dropout = layer.at("dropout").get<double>();
    a.body.push_back(b);
  }
  a.selection_hidden = value_or<std::size_t>(j, "selection_hidden", 16);
  a.selection_batch_norm = value_or(j, "selection_batch_norm", true);
  a.auxiliary_head = value_or(j, "auxiliary_head", true);
  return a;
}

TrainConfig parse_train(const json& j) {
  reject_unknown(j, {"optimizer", "lr", "momentum", "beta1", "beta2", "eps",
                     "weight_decay", "halving_period", "epochs", "batch_size",
                     "shuffle", "checkpoint_every"},
                 "train");
  TrainConfig t;
  const std::string kind = value_or<std::string>(j, "optimizer", "adam");
  if (kind == "adam") {
    AdamConfig a;
    a.lr = value_or(j, "lr", a.lr);
    a.beta1 = value_or(j, "beta1", a.beta1);
    a.beta2 = value_or(j, "beta2", a.beta2);
    a.eps = value_or(j, "eps", a.eps);
    a.weight_decay = value_or(j, "weight_decay", a.weight_decay);
    t.optimizer = a;
  } else if (kind == "sgd") {
    SgdConfig s;
    s.lr = value_or(j, "lr", s.lr);
    s.momentum = value_or(j, "momentum", s.momentum);
    s.weight_decay = value_or(j, "weight_decay", s.weight_decay);
    s.halving_period = value_or<std::size_t>(j, "halving_period", 0);
    t.optimizer = s;
  } else {
    throw ConfigError("unknown optimizer '" + kind + "'");
  }
  t.epochs = value_or<std::size_t>(j, "epochs", t.epochs);
  t.batch_size = value_or<std::size_t>(j, "batch_size", t.batch_size);
  t.shuffle = value_or(j, "shuffle", true);
  t.checkpoint_every = value_or<std::size_t>(j, "checkpoint_every", 0);
  return t;
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::string& base_dir) {
  reject_unknown(doc, {"data", "split", "model", "train", "loss", "calibration",
                       "mc_dropout", "seeds", "coverages", "out"},
                 "config");
  RunConfig config;
  if (!doc.contains("data")) throw ConfigError("config lacks 'data'");
  config.data = parse_data(doc.at("data"), base_dir);
  const Task task = config.data.synthetic
                        ? Task::classification(config.data.synthetic->classes)
                        : config.data.schema.task;

  if (doc.contains("split")) {
    const json& s = doc.at("split");
    reject_unknown(s, {"train", "calibration", "test", "seed", "stratified"},
                   "split");
    config.split.train = value_or(s, "train", config.split.train);
    config.split.calibration = value_or(s, "calibration", config.split.calibration);
    config.split.test = value_or(s, "test", config.split.test);
    config.split.seed = value_or<std::uint64_t>(s, "seed", 0);
    config.split.stratified = value_or(s, "stratified", false);
  }
  config.split.validate();

  if (!doc.contains("model")) throw ConfigError("config lacks 'model'");
  config.architecture = parse_model(doc.at("model"));
  config.architecture.task = task;

  config.train = parse_train(doc.value("train", json::object()));
  if (doc.contains("loss")) {
    const json& l = doc.at("loss");
    reject_unknown(l, {"coverage", "lambda", "alpha"}, "loss");
    config.train.loss.coverage = value_or(l, "coverage", 1.0);
    config.train.loss.lambda = value_or(l, "lambda", 32.0);
    config.train.loss.alpha = value_or(l, "alpha", 0.5);
  }
  config.train.loss.task_loss = task_loss_for(task);
  config.train.validate();

  if (doc.contains("calibration")) {
    reject_unknown(doc.at("calibration"), {"delta"}, "calibration");
    config.delta = value_or(doc.at("calibration"), "delta", config.delta);
  }
  if (doc.contains("mc_dropout")) {
    const json& m = doc.at("mc_dropout");
    reject_unknown(m, {"rate", "passes"}, "mc_dropout");
    config.mc_dropout.rate = value_or(m, "rate", config.mc_dropout.rate);
    config.mc_dropout.passes = value_or(m, "passes", config.mc_dropout.passes);
  }
  config.seeds = value_or(doc, "seeds", config.seeds);
  if (config.seeds.empty()) throw ConfigError("seed list must not be empty");
  config.coverages = value_or(doc, "coverages", std::vector<double>{});
  config.out_dir = value_or<std::string>(doc, "out", "");
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  const fs::path parent = fs::path(path).parent_path();
  return parse_run_config(doc, parent.empty() ? "." : parent.string());
}

json to_json(const RunConfig& c) {
  json data;
  if (c.data.csv_path) {
    data["csv"] = *c.data.csv_path;
    data["target"] = c.data.schema.target_column;
    data["features"] = c.data.schema.feature_columns;
    data["header"] = c.data.schema.header;
    data["task"] = to_string(c.data.schema.task);
  } else {
    const SyntheticSpec& s = *c.data.synthetic;
    data["synthetic"] = {{"seed", s.seed},
                         {"samples", s.samples},
                         {"classes", s.classes},
                         {"dims", s.dims},
                         {"noise_fraction", s.noise_fraction},
                         {"cluster_radius", s.cluster_radius},
                         {"cluster_std", s.cluster_std},
                         {"noise_radius", s.noise_radius}};
  }
  data["standardize_targets"] = c.data.standardize_targets;

  json body = json::array();
  for (const auto& b : c.architecture.body) {
    json layer = {{"width", b.width},
                  {"activation", b.activation == Activation::Relu ? "relu" : "linear"},
                  {"batch_norm", b.batch_norm}};
    if (b.dropout) layer["dropout"] = *b.dropout;
    body.push_back(layer);
  }
  json train;
  if (const auto* a = std::get_if<AdamConfig>(&c.train.optimizer)) {
    train = {{"optimizer", "adam"}, {"lr", a->lr}, {"beta1", a->beta1},
             {"beta2", a->beta2}, {"eps", a->eps}, {"weight_decay", a->weight_decay}};
  } else {
    const auto& s = std::get<SgdConfig>(c.train.optimizer);
    train = {{"optimizer", "sgd"}, {"lr", s.lr}, {"momentum", s.momentum},
             {"weight_decay", s.weight_decay}, {"halving_period", s.halving_period}};
  }
  train["epochs"] = c.train.epochs;
  train["batch_size"] = c.train.batch_size;
  train["shuffle"] = c.train.shuffle;
  train["checkpoint_every"] = c.train.checkpoint_every;

  return {{"data", data},
          {"split", {{"train", c.split.train},
                     {"calibration", c.split.calibration},
                     {"test", c.split.test},
                     {"seed", c.split.seed},
                     {"stratified", c.split.stratified}}},
          {"model", {{"body", body},
                     {"selection_hidden", c.architecture.selection_hidden},
                     {"selection_batch_norm", c.architecture.selection_batch_norm},
                     {"auxiliary_head", c.architecture.auxiliary_head}}},
          {"train", train},
          {"loss", {{"coverage", c.train.loss.coverage},
                    {"lambda", c.train.loss.lambda},
                    {"alpha", c.train.loss.alpha}}},
          {"calibration", {{"delta", c.delta}}},
          {"mc_dropout", {{"rate", c.mc_dropout.rate}, {"passes", c.mc_dropout.passes}}},
          {"seeds", c.seeds},
          {"coverages", c.coverages},
          {"out", c.out_dir}};
}

std::string config_hash(const RunConfig& config) {
  // The output location does not change results.
  json doc = to_json(config);
  doc.erase("out");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buf;
}

}  // namespace selnet
