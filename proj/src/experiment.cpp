#include "selnet/experiment.hpp"

#include <cstdio>
#include <sstream>

#include "selnet/error.hpp"
#include "selnet/rng.hpp"

namespace selnet {
namespace {

constexpr std::uint64_t kSplitStream = 0x5b;
constexpr std::uint64_t kDataStream = 0xda;
constexpr std::uint64_t kMcStream = 0x3d;

std::string coverage_label(double c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", c);
  return buf;
}

double full_coverage_risk(const ScoredSplit& split, const Task& task) {
  const std::vector<std::uint8_t> all(split.labels.size(), 1);
  return selective_metrics(split.predictions, split.labels, all, task).risk;
}

double risk_at_target(const ScoredSplit& calibration, const ScoredSplit& test,
                      double coverage, const Task& task,
                      double* achieved = nullptr) {
  const double c[] = {coverage};
  const CurvePoint point = risk_coverage_curve(calibration, test, c, task)[0];
  if (achieved) *achieved = point.achieved_coverage;
  return point.risk;
}

}  // namespace

Dataset load_data(const RunConfig& config, std::uint64_t seed) {
  if (config.data.csv_path) {
    return load_csv(*config.data.csv_path, config.data.schema);
  }
  SyntheticSpec spec = *config.data.synthetic;
  spec.seed = derive_seed(spec.seed, derive_seed(kDataStream, seed));
  return synth_classification(spec);
}

PreparedData prepare_data(const RunConfig& config, std::uint64_t seed) {
  const Dataset raw = load_data(config, seed);
  SplitSpec spec = config.split;
  spec.seed = derive_seed(spec.seed, derive_seed(kSplitStream, seed));
  PreparedData out;
  out.raw = split(raw, spec);
  out.normalization =
      fit_normalization(out.raw.train, config.data.standardize_targets);
  out.train = apply_normalization(out.raw.train, out.normalization);
  out.architecture = config.architecture;
  out.architecture.input_width = out.train.width();
  out.architecture.task = raw.task;
  return out;
}

TrainConfig train_config_for(const RunConfig& config, double coverage,
                             std::uint64_t seed) {
  TrainConfig t = config.train;
  t.seed = seed;
  t.loss.coverage = coverage;
  return t;
}

SelectiveNet train_selectivenet(const RunConfig& config,
                                const PreparedData& data, double coverage,
                                std::uint64_t seed, TrainHistory* history) {
  SelectiveNet model = SelectiveNet::build(data.architecture, seed);
  TrainHistory h = train(model, data.train, train_config_for(config, coverage, seed));
  model.set_normalization(data.normalization);
  if (history) *history = std::move(h);
  return model;
}

SelectiveNet train_baseline(const RunConfig& config, const PreparedData& data,
                            std::uint64_t seed, TrainHistory* history) {
  SelectiveNet model = SelectiveNet::baseline(data.architecture, seed);
  TrainHistory h = train(model, data.train, train_config_for(config, 1.0, seed));
  model.set_normalization(data.normalization);
  if (history) *history = std::move(h);
  return model;
}

Tensor model_inputs(const SelectiveNet& model, const Matrix& raw) {
  const auto& stats = model.normalization();
  if (!stats) {
    if (raw.cols != model.config().input_width) {
      throw DimensionError("model expects " +
                           std::to_string(model.config().input_width) +
                           " features, data has " + std::to_string(raw.cols));
    }
    return raw.to_tensor();
  }
  if (raw.cols != stats->raw_width) {
    throw DimensionError("model was trained on " +
                         std::to_string(stats->raw_width) +
                         " raw features, data has " + std::to_string(raw.cols));
  }
  return apply_normalization(raw, *stats).to_tensor();
}

ScoredSplit predict_split(SelectiveNet& model, const Dataset& raw,
                          HeadOutputs* outputs) {
  if (raw.task != model.task()) {
    throw DataError("data task " + to_string(raw.task) +
                    " does not match model task " + to_string(model.task()));
  }
  const Tensor x = model_inputs(model, raw.features);
  const HeadOutputs out = model.forward(x, Mode::Eval);
  ScoredSplit scored;
  scored.labels = raw.labels;
  const std::size_t m = raw.size();
  scored.predictions.resize(m);
  const auto f = out.f.values();
  if (model.task().is_classification()) {
    const std::size_t k = model.task().output_width();
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (f[i * k + j] > f[i * k + best]) best = j;
      }
      scored.predictions[i] = static_cast<double>(best);
    }
  } else {
    const auto& stats = model.normalization();
    for (std::size_t i = 0; i < m; ++i) {
      scored.predictions[i] = stats ? stats->target_to_original(f[i]) : f[i];
    }
  }
  if (outputs) *outputs = out;
  return scored;
}

ScoredSplit score_split(SelectiveNet& model, const Dataset& raw,
                        ScoreSource source, const McDropoutConfig& mc,
                        std::uint64_t seed) {
  HeadOutputs out;
  ScoredSplit scored = predict_split(model, raw, &out);

  switch (source) {
    case ScoreSource::Selection: {
      if (!model.has_selection_head()) {
        throw ConfigError("score 'g' needs a model with a selection head");
      }
      const auto g = out.g.values();
      scored.scores.assign(g.begin(), g.end());
      break;
    }
    case ScoreSource::SoftmaxResponse:
      if (!model.task().is_classification()) {
        throw ConfigError("softmax response applies to classification only");
      }
      scored.scores = sr_confidence(out.f).values;
      break;
    case ScoreSource::McDropout:
      scored.scores = mc_dropout_confidence(
                          model, model_inputs(model, raw.features), mc.passes,
                          mc.rate, seed)
                          .values;
      break;
  }
  return scored;
}

std::string join_numbers(std::span<const double> values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << coverage_label(values[i]);
  }
  return out.str();
}

std::string provenance_text(const std::string& command,
                            const std::string& config_hash,
                            std::span<const std::uint64_t> seeds) {
  std::ostringstream out;
  out << "selnet " << command << " format=" << kCsvFormatVersion
      << " config_hash=" << config_hash << " seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out << ',';
    out << seeds[i];
  }
  return out.str();
}

CompareResult run_compare(const RunConfig& config,
                          std::span<const double> coverages,
                          std::span<const std::uint64_t> seeds,
                          const ProgressFn& progress) {
  if (coverages.empty()) throw ConfigError("compare needs a coverage grid");
  if (seeds.empty()) throw ConfigError("compare needs at least one seed");
  const Task task = config.data.synthetic
                        ? Task::classification(config.data.synthetic->classes)
                        : config.data.schema.task;
  const bool has_dropout = [&] {
    for (const auto& b : config.architecture.body) {
      if (b.dropout) return true;
    }
    return false;
  }();

  CompareResult result;
  result.coverages.assign(coverages.begin(), coverages.end());
  result.seeds.assign(seeds.begin(), seeds.end());
  if (has_dropout) result.baseline_names.push_back("mc_dropout");
  if (task.is_classification()) result.baseline_names.push_back("sr");
  // SR stays as an NA column for regression to keep the layout fixed.
  std::vector<std::string> columns = result.baseline_names;
  if (!task.is_classification()) columns.push_back("sr");
  result.baseline_risk.assign(columns.size(), {});

  for (std::uint64_t seed : seeds) {
    const PreparedData data = prepare_data(config, seed);
    std::vector<double> risks;
    std::vector<double> full;
    std::vector<double> achieved;
    for (double c : coverages) {
      if (progress) {
        progress("seed " + std::to_string(seed) + ": SelectiveNet c=" +
                 coverage_label(c));
      }
      SelectiveNet model = train_selectivenet(config, data, c, seed);
      const ScoredSplit calib = score_split(model, data.raw.calibration,
                                            ScoreSource::Selection,
                                            config.mc_dropout, seed);
      const ScoredSplit test = score_split(model, data.raw.test,
                                           ScoreSource::Selection,
                                           config.mc_dropout, seed);
      double cov = 0.0;
      risks.push_back(risk_at_target(calib, test, c, task, &cov));
      achieved.push_back(cov);
      full.push_back(full_coverage_risk(test, task));
    }
    result.selnet_risk.push_back(risks);
    result.selnet_full_risk.push_back(full);
    result.selnet_achieved_coverage.push_back(achieved);

    if (progress) progress("seed " + std::to_string(seed) + ": baseline");
    SelectiveNet baseline = train_baseline(config, data, seed);
    for (std::size_t b = 0; b < result.baseline_names.size(); ++b) {
      const ScoreSource source = result.baseline_names[b] == "sr"
                                     ? ScoreSource::SoftmaxResponse
                                     : ScoreSource::McDropout;
      const ScoredSplit calib =
          score_split(baseline, data.raw.calibration, source, config.mc_dropout,
                      derive_seed(derive_seed(kMcStream, seed), 1));
      const ScoredSplit test =
          score_split(baseline, data.raw.test, source, config.mc_dropout,
                      derive_seed(derive_seed(kMcStream, seed), 2));
      std::vector<double> row;
      for (double c : coverages) row.push_back(risk_at_target(calib, test, c, task));
      result.baseline_risk[b].push_back(row);
    }
  }

  std::vector<Aggregate> selnet;
  std::vector<std::vector<std::optional<Aggregate>>> baselines(columns.size());
  for (std::size_t j = 0; j < coverages.size(); ++j) {
    std::vector<double> v;
    for (const auto& r : result.selnet_risk) v.push_back(r[j]);
    selnet.push_back(aggregate(v));
    for (std::size_t b = 0; b < columns.size(); ++b) {
      if (result.baseline_risk[b].empty()) {
        baselines[b].push_back(std::nullopt);
        continue;
      }
      std::vector<double> w;
      for (const auto& r : result.baseline_risk[b]) w.push_back(r[j]);
      baselines[b].push_back(aggregate(w));
    }
  }
  result.rows = compare_report(coverages, selnet, baselines);
  result.csv = compare_csv(
      result.rows, columns,
      provenance_text("compare", config_hash(config), seeds) +
          "\ntask=" + to_string(task) + " coverages=" + join_numbers(coverages));
  return result;
}

GridResult run_grid(const RunConfig& config,
                    std::span<const double> train_coverages,
                    std::span<const double> calibration_coverages,
                    std::span<const std::uint64_t> seeds,
                    const ProgressFn& progress) {
  if (train_coverages.empty() || calibration_coverages.empty() || seeds.empty()) {
    throw ConfigError("grid needs coverages and seeds");
  }
  GridResult result;
  result.train_coverages.assign(train_coverages.begin(), train_coverages.end());
  result.calibration_coverages.assign(calibration_coverages.begin(),
                                      calibration_coverages.end());
  Task task;
  for (std::uint64_t seed : seeds) {
    const PreparedData data = prepare_data(config, seed);
    task = data.architecture.task;
    std::vector<ScoredModel> models;
    for (double c : train_coverages) {
      if (progress) {
        progress("seed " + std::to_string(seed) + ": SelectiveNet c=" +
                 coverage_label(c));
      }
      SelectiveNet model = train_selectivenet(config, data, c, seed);
      models.push_back(
          {score_split(model, data.raw.calibration, ScoreSource::Selection,
                       config.mc_dropout, seed),
           score_split(model, data.raw.test, ScoreSource::Selection,
                       config.mc_dropout, seed)});
    }
    result.per_seed.push_back(
        cross_calibration_grid(models, calibration_coverages, task));
  }
  const std::size_t rows = train_coverages.size();
  const std::size_t cols = calibration_coverages.size();
  result.mean.assign(rows, std::vector<double>(cols));
  result.standard_error.assign(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      std::vector<double> v;
      for (const auto& g : result.per_seed) v.push_back(g[i][j]);
      const Aggregate a = aggregate(v);
      result.mean[i][j] = a.mean;
      result.standard_error[i][j] = a.standard_error;
    }
  }
  result.csv = grid_csv(train_coverages, calibration_coverages, result.mean,
                        provenance_text("grid", config_hash(config), seeds) +
                            "\ntask=" + to_string(task));
  return result;
}

}  // namespace selnet
