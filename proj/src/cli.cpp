#include "selnet/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "selnet/calibration.hpp"
#include "selnet/checkpoint.hpp"
#include "selnet/config.hpp"
#include "selnet/error.hpp"
#include "selnet/experiment.hpp"

namespace selnet::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string model;
  std::vector<std::string> models;
  std::string data;
  std::string calib;
  std::string target;
  std::string out;
  std::string score = "g";
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> coverages;
  double coverage = 0.8;
  double delta = 0.05;
  std::optional<double> tau;
  bool baseline = false;
  std::optional<double> train_coverage;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> mc_passes;
  std::optional<double> mc_rate;
};

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string output_dir(const Options& o, const std::string& command) {
  if (!o.out.empty()) return o.out;
  const char* root = std::getenv("SELNET_OUT_ROOT");
  return (fs::path(root && *root ? root : "runs") / command).string();
}

fs::path prepare_dir(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text) || !out.flush()) {
    throw IoError("cannot write '" + path.string() + "'");
  }
  if (text.empty()) throw IoError("refusing to write empty '" + path.string() + "'");
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string file_hash(const std::string& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_bytes(path))));
  return buf;
}

Dataset load_for_model(const SelectiveNet& model, const std::string& path,
                       const std::string& target) {
  CsvSchema schema;
  schema.target_column = target;
  schema.task = model.task();
  return load_csv(path, schema);
}

std::string dataset_csv(const Dataset& data) {
  std::ostringstream out;
  for (std::size_t j = 0; j < data.width(); ++j) {
    out << (j < data.feature_names.size() ? data.feature_names[j]
                                          : "x" + std::to_string(j))
        << ',';
  }
  out << "target\n";
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", data.labels[i]);
    out << buf;
  }
  return out.str();
}

McDropoutConfig mc_config(const Options& o, const Task& task) {
  McDropoutConfig mc;
  mc.rate = task.is_classification() ? 0.5 : 0.05;
  mc.passes = task.is_classification() ? 100 : 200;
  if (o.mc_rate) mc.rate = *o.mc_rate;
  if (o.mc_passes) mc.passes = *o.mc_passes;
  return mc;
}

// Calibration and test splits for model-level commands: --calib when given,
// otherwise a seeded half/half split of --data.
std::pair<Dataset, Dataset> held_out_pair(const SelectiveNet& model,
                                          const Options& o) {
  Dataset data = load_for_model(model, o.data, o.target);
  if (!o.calib.empty()) {
    return {load_for_model(model, o.calib, o.target), std::move(data)};
  }
  const std::size_t half = data.size() / 2;
  if (half == 0 || half == data.size()) {
    throw DataError("need at least 2 rows to split '" + o.data +
                    "' into calibration and test halves");
  }
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(o.seed, 0xca11);
  rng.shuffle(order);
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {data.subset(a), data.subset(b)};
}

void warn_on_overlap(const Checkpoint& ckpt, const std::string& data) {
  if (ckpt.source.empty()) return;
  std::error_code ec;
  if (fs::equivalent(ckpt.source, data, ec)) {
    std::cerr << "warning: calibration data '" << data
              << "' is the file the model was trained on; the coverage "
                 "guarantee assumes independent samples\n";
  }
}

int cmd_train(const Options& o) {
  RunConfig config = load_run_config(o.config);
  if (o.epochs) config.train.epochs = *o.epochs;
  const double coverage = o.train_coverage.value_or(config.train.loss.coverage);
  config.train.loss.coverage = coverage;
  config.train.validate();
  config.seeds = {o.seed};
  const fs::path dir = prepare_dir(output_dir(o, "train"));
  config.out_dir = dir.string();

  const PreparedData data = prepare_data(config, o.seed);
  TrainHistory history;
  SelectiveNet model = o.baseline
                           ? train_baseline(config, data, o.seed, &history)
                           : train_selectivenet(config, data, coverage, o.seed, &history);
  const std::string source = config.data.csv_path ? *config.data.csv_path : "";
  save_model((dir / "model.ckpt").string(), model, std::nullopt, true, source);

  std::ostringstream h;
  h << "# " << provenance_text("train", config_hash(config), config.seeds) << '\n';
  h << "epoch,total_loss,selective_loss,auxiliary_loss,soft_coverage,"
       "hard_coverage,selective_risk\n";
  for (const auto& e : history.epochs) {
    h << e.epoch << ',' << fixed(e.total_loss) << ',' << fixed(e.selective_loss)
      << ',' << fixed(e.auxiliary_loss) << ',' << fixed(e.soft_coverage) << ','
      << fixed(e.hard_coverage) << ',' << fixed(e.selective_risk) << '\n';
  }
  write_file(dir / "history.csv", h.str());
  write_file(dir / "calibration.csv", dataset_csv(data.raw.calibration));
  write_file(dir / "test.csv", dataset_csv(data.raw.test));
  write_file(dir / "effective_config.json", to_json(config).dump(2) + "\n");
  std::cout << "trained c=" << fixed(coverage) << " on " << data.train.size()
            << " samples; artifacts in " << dir.string() << '\n';
  return 0;
}

int cmd_calibrate(const Options& o) {
  Checkpoint ckpt = load_model(o.model);
  warn_on_overlap(ckpt, o.data);
  if (!ckpt.model.has_selection_head()) {
    throw ConfigError("model '" + o.model + "' has no selection head to calibrate");
  }
  const Dataset data = load_for_model(ckpt.model, o.data, o.target);
  const CalibrationResult result =
      calibrate(ckpt.model, model_inputs(ckpt.model, data.features), o.coverage,
                o.delta);
  const fs::path dir = prepare_dir(output_dir(o, "calibrate"));
  save_model((dir / "model.ckpt").string(), ckpt.model, result,
             ckpt.model.has_auxiliary_head(), ckpt.source);
  std::ostringstream r;
  r << "threshold=" << fixed(result.threshold) << '\n'
    << "target_coverage=" << fixed(result.target_coverage) << '\n'
    << "achieved_coverage=" << fixed(result.achieved_coverage) << '\n'
    << "validation_size=" << result.validation_size << '\n'
    << "delta=" << fixed(result.delta) << '\n'
    << "epsilon=" << fixed(result.epsilon) << '\n';
  write_file(dir / "calibration.txt", r.str());
  std::cout << r.str();
  return 0;
}

int cmd_evaluate(const Options& o) {
  Checkpoint ckpt = load_model(o.model);
  const Dataset data = load_for_model(ckpt.model, o.data, o.target);
  double tau = 0.5;
  if (ckpt.calibration) tau = ckpt.calibration->threshold;
  if (o.tau) tau = *o.tau;
  HeadOutputs heads;
  const ScoredSplit scored = predict_split(ckpt.model, data, &heads);
  std::vector<std::uint8_t> mask(data.size(), 1);
  if (ckpt.model.has_selection_head()) {
    const auto g = heads.g.values();
    mask = accept_mask(std::vector<double>(g.begin(), g.end()), tau);
  }
  const EvalReport report =
      selective_metrics(scored.predictions, scored.labels, mask, ckpt.model.task(),
                        ckpt.model.trained_coverage().value_or(1.0));
  std::ostringstream out;
  out << "# " << provenance_text("evaluate", file_hash(o.model), {&o.seed, 1})
      << '\n'
      << "threshold,coverage,risk,stderr,covered,rejected,total\n"
      << fixed(tau) << ',' << fixed(report.coverage) << ',' << fixed(report.risk)
      << ',' << fixed(report.risk_stderr) << ',' << report.covered << ','
      << report.rejected << ',' << report.total << '\n';
  if (!o.out.empty() || std::getenv("SELNET_OUT_ROOT")) {
    write_file(prepare_dir(output_dir(o, "evaluate")) / "eval.csv", out.str());
  }
  std::cout << "coverage=" << fixed(report.coverage) << " risk="
            << fixed(report.risk) << " stderr=" << fixed(report.risk_stderr)
            << " covered=" << report.covered << " rejected=" << report.rejected
            << '\n';
  return 0;
}

int cmd_curve(const Options& o) {
  Checkpoint ckpt = load_model(o.model);
  const ScoreSource source = parse_score_source(o.score);
  auto [calib_data, test_data] = held_out_pair(ckpt.model, o);
  const McDropoutConfig mc = mc_config(o, ckpt.model.task());
  const ScoredSplit calib = score_split(ckpt.model, calib_data, source, mc,
                                        derive_seed(o.seed, 1));
  const ScoredSplit test = score_split(ckpt.model, test_data, source, mc,
                                       derive_seed(o.seed, 2));
  const auto curve =
      risk_coverage_curve(calib, test, o.coverages, ckpt.model.task());
  const fs::path dir = prepare_dir(output_dir(o, "curve"));
  write_file(dir / "curve.csv",
             curve_csv(curve, provenance_text("curve", file_hash(o.model),
                                              {&o.seed, 1}) +
                                  "\nscore=" + to_string(source)));
  std::cout << "wrote " << (dir / "curve.csv").string() << '\n';
  return 0;
}

int cmd_grid(const Options& o) {
  std::vector<ScoredModel> scored;
  std::vector<double> train_coverages;
  std::optional<Task> task;
  std::string hashes;
  for (const auto& path : o.models) {
    Checkpoint ckpt = load_model(path);
    if (task && *task != ckpt.model.task()) {
      throw ConfigError("grid models must share one task");
    }
    task = ckpt.model.task();
    auto [calib_data, test_data] = held_out_pair(ckpt.model, o);
    scored.push_back({score_split(ckpt.model, calib_data, ScoreSource::Selection,
                                  {}, o.seed),
                      score_split(ckpt.model, test_data, ScoreSource::Selection,
                                  {}, o.seed)});
    train_coverages.push_back(ckpt.model.trained_coverage().value_or(1.0));
    hashes += file_hash(path);
  }
  const auto grid = cross_calibration_grid(scored, o.coverages, *task);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(hashes)));
  const fs::path dir = prepare_dir(output_dir(o, "grid"));
  write_file(dir / "grid.csv",
             grid_csv(train_coverages, o.coverages, grid,
                      provenance_text("grid", buf, {&o.seed, 1})));
  std::cout << "wrote " << (dir / "grid.csv").string() << '\n';
  return 0;
}

int cmd_compare(const Options& o) {
  RunConfig config = load_run_config(o.config);
  if (o.epochs) config.train.epochs = *o.epochs;
  if (!o.coverages.empty()) config.coverages = o.coverages;
  if (!o.seeds.empty()) config.seeds = o.seeds;
  if (config.coverages.empty()) config.coverages = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  if (o.mc_rate) config.mc_dropout.rate = *o.mc_rate;
  if (o.mc_passes) config.mc_dropout.passes = *o.mc_passes;
  const fs::path dir = prepare_dir(output_dir(o, "compare"));
  config.out_dir = dir.string();
  const CompareResult result =
      run_compare(config, config.coverages, config.seeds,
                  [](const std::string& msg) { std::cerr << msg << '\n'; });
  write_file(dir / "compare.csv", result.csv);
  write_file(dir / "effective_config.json", to_json(config).dump(2) + "\n");
  std::cout << result.csv;
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Selective prediction with SelectiveNet"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a SelectiveNet from a config");
  train->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  train->add_option("--seed", o.seed);
  train->add_option("--out", o.out);
  train->add_option("--coverage", o.train_coverage, "Target coverage (overrides config)");
  train->add_option("--epochs", o.epochs, "Epoch count (overrides config)");
  train->add_flag("--baseline", o.baseline, "Train body and f only at full coverage");

  auto* calibrate = app.add_subcommand("calibrate", "Fit the selection threshold");
  calibrate->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
  calibrate->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
  calibrate->add_option("--coverage", o.coverage)->required();
  calibrate->add_option("--delta", o.delta);
  calibrate->add_option("--target", o.target, "Target column (default: last)");
  calibrate->add_option("--out", o.out);

  auto* evaluate = app.add_subcommand("evaluate", "Selective risk on labeled data");
  evaluate->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--tau", o.tau, "Threshold (default: calibrated or 0.5)");
  evaluate->add_option("--target", o.target);
  evaluate->add_option("--out", o.out);

  auto* curve = app.add_subcommand("curve", "Risk-coverage curve");
  curve->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
  curve->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
  curve->add_option("--calib", o.calib, "Calibration data (default: half of --data)")
      ->check(CLI::ExistingFile);
  curve->add_option("--coverages", o.coverages)->required()->delimiter(',');
  curve->add_option("--score", o.score)->check(CLI::IsMember({"g", "sr", "mcdropout"}));
  curve->add_option("--mc-passes", o.mc_passes);
  curve->add_option("--mc-rate", o.mc_rate);
  curve->add_option("--seed", o.seed);
  curve->add_option("--target", o.target);
  curve->add_option("--out", o.out);

  auto* grid = app.add_subcommand("grid", "Cross-calibration grid");
  grid->add_option("--models", o.models)->required()->delimiter(',')
      ->check(CLI::ExistingFile);
  grid->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
  grid->add_option("--calib", o.calib)->check(CLI::ExistingFile);
  grid->add_option("--coverages", o.coverages)->required()->delimiter(',');
  grid->add_option("--seed", o.seed);
  grid->add_option("--target", o.target);
  grid->add_option("--out", o.out);

  auto* compare = app.add_subcommand("compare", "SelectiveNet against baselines");
  compare->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  compare->add_option("--coverages", o.coverages)->delimiter(',');
  compare->add_option("--seeds", o.seeds)->delimiter(',');
  compare->add_option("--epochs", o.epochs);
  compare->add_option("--mc-passes", o.mc_passes);
  compare->add_option("--mc-rate", o.mc_rate);
  compare->add_option("--out", o.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(o);
    if (*calibrate) return cmd_calibrate(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*curve) return cmd_curve(o);
    if (*grid) return cmd_grid(o);
    if (*compare) return cmd_compare(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace selnet::cli
