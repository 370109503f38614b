#include "selnet/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "selnet/calibration.hpp"
#include "selnet/error.hpp"
#include "selnet/rng.hpp"

namespace selnet {
namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_provenance(std::ostringstream& out, const std::string& provenance) {
  std::istringstream lines(provenance);
  std::string line;
  while (std::getline(lines, line)) out << "# " << line << '\n';
}

// Variance about the first value, exact zero for identical samples.
double shifted_variance(std::span<const double> xs) {
  const double ref = xs[0];
  double s = 0.0;
  double ss = 0.0;
  for (double x : xs) {
    s += x - ref;
    ss += (x - ref) * (x - ref);
  }
  const double n = static_cast<double>(xs.size());
  const double var = ss / n - (s / n) * (s / n);
  return var > 0.0 ? var : 0.0;
}

}  // namespace

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  double total = 0.0;
  for (double v : values) total += v;
  a.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    const double n = static_cast<double>(values.size());
    a.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return a;
}

std::string to_string(ScoreSource source) {
  switch (source) {
    case ScoreSource::Selection:
      return "g";
    case ScoreSource::SoftmaxResponse:
      return "sr";
    case ScoreSource::McDropout:
      return "mcdropout";
  }
  return "g";
}

ScoreSource parse_score_source(const std::string& text) {
  if (text == "g") return ScoreSource::Selection;
  if (text == "sr") return ScoreSource::SoftmaxResponse;
  if (text == "mcdropout") return ScoreSource::McDropout;
  throw ConfigError("unknown score '" + text + "' (expected g, sr or mcdropout)");
}

EvalReport selective_metrics(std::span<const double> predictions,
                             std::span<const double> labels,
                             std::span<const std::uint8_t> accept,
                             const Task& task, double target_coverage) {
  if (predictions.size() != labels.size() || accept.size() != labels.size()) {
    throw DimensionError("selective metrics: " +
                         std::to_string(predictions.size()) + " predictions, " +
                         std::to_string(labels.size()) + " labels, " +
                         std::to_string(accept.size()) + " mask entries");
  }
  EvalReport report;
  report.target_coverage = target_coverage;
  report.total = labels.size();
  std::vector<double> losses;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!accept[i]) continue;
    double loss = 0.0;
    if (task.is_classification()) {
      loss = predictions[i] == labels[i] ? 0.0 : 100.0;
    } else {
      const double d = predictions[i] - labels[i];
      loss = d * d;
    }
    losses.push_back(loss);
  }
  report.covered = losses.size();
  report.rejected = report.total - report.covered;
  if (report.covered == 0) {
    throw DataError("selective risk is undefined: no sample was accepted");
  }
  report.coverage =
      static_cast<double>(report.covered) / static_cast<double>(report.total);
  const Aggregate a = aggregate(losses);
  report.risk = a.mean;
  report.risk_stderr = a.standard_error;
  return report;
}

ConfidenceScore sr_confidence(const Tensor& probabilities) {
  if (probabilities.rank() != 2) {
    throw DimensionError("softmax response expects [m x k] probabilities");
  }
  ConfidenceScore score{ScoreSource::SoftmaxResponse, {}};
  const std::size_t m = probabilities.dim(0);
  const std::size_t k = probabilities.dim(1);
  const auto v = probabilities.values();
  score.values.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double best = v[i * k];
    for (std::size_t j = 1; j < k; ++j) best = std::max(best, v[i * k + j]);
    score.values[i] = best;
  }
  return score;
}

ConfidenceScore mc_dropout_confidence(SelectiveNet& model, const Tensor& inputs,
                                      std::size_t passes, double p,
                                      std::uint64_t seed) {
  if (passes < 2) throw ContractError("MC-dropout needs at least 2 passes");
  if (!model.has_dropout()) {
    throw ConfigError("MC-dropout needs a model with dropout layers");
  }
  if (inputs.rank() != 2) throw DimensionError("MC-dropout expects [m x d] inputs");
  const std::size_t m = inputs.dim(0);
  const std::size_t d = inputs.dim(1);
  const auto x = inputs.values();
  const Task task = model.task();
  const std::size_t k = task.output_width();

  ConfidenceScore score{ScoreSource::McDropout, std::vector<double>(m)};
  std::vector<double> replicated(passes * d);
  std::vector<double> series(passes);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t r = 0; r < passes; ++r) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                  replicated.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    Rng rng(seed, derive_seed(0x3c, i));
    const HeadOutputs out = model.forward(
        Tensor::matrix(passes, d, replicated), Mode::ForcedActive, &rng, p);
    const auto f = out.f.values();
    if (task.is_classification()) {
      std::size_t consensus = 0;
      double best = -1.0;
      for (std::size_t c = 0; c < k; ++c) {
        double total = 0.0;
        for (std::size_t r = 0; r < passes; ++r) total += f[r * k + c];
        if (total > best) {
          best = total;
          consensus = c;
        }
      }
      for (std::size_t r = 0; r < passes; ++r) series[r] = f[r * k + consensus];
    } else {
      std::copy(f.begin(), f.end(), series.begin());
    }
    score.values[i] = 0.0 - shifted_variance(series);
  }
  return score;
}

double threshold_for_coverage(std::span<const double> scores, double coverage) {
  return select_threshold(scores, coverage);
}

double threshold_for_target(std::span<const double> calibration_scores,
                            double coverage) {
  if (coverage >= 1.0) {
    if (calibration_scores.empty()) {
      throw ContractError("threshold selection on no scores");
    }
    return -std::numeric_limits<double>::infinity();
  }
  return select_threshold(calibration_scores, coverage);
}

std::vector<std::uint8_t> accept_mask(std::span<const double> scores,
                                      double threshold) {
  std::vector<std::uint8_t> mask(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    mask[i] = scores[i] >= threshold ? 1 : 0;
  }
  return mask;
}

std::vector<CurvePoint> risk_coverage_curve(const ScoredSplit& calibration,
                                            const ScoredSplit& test,
                                            std::span<const double> coverages,
                                            const Task& task) {
  std::vector<CurvePoint> curve;
  for (double c : coverages) {
    if (!(c > 0.0 && c <= 1.0)) {
      throw ConfigError("coverage grid values must lie in (0, 1]");
    }
    CurvePoint point;
    point.target_coverage = c;
    point.threshold = threshold_for_target(calibration.scores, c);
    const auto mask = accept_mask(test.scores, point.threshold);
    const EvalReport report =
        selective_metrics(test.predictions, test.labels, mask, task, c);
    point.achieved_coverage = report.coverage;
    point.risk = report.risk;
    point.risk_stderr = report.risk_stderr;
    curve.push_back(point);
  }
  return curve;
}

std::vector<std::vector<double>> cross_calibration_grid(
    std::span<const ScoredModel> models, std::span<const double> coverages,
    const Task& task) {
  std::vector<std::vector<double>> grid;
  for (const auto& model : models) {
    std::vector<double> row;
    for (const auto& point :
         risk_coverage_curve(model.calibration, model.test, coverages, task)) {
      row.push_back(point.risk);
    }
    grid.push_back(std::move(row));
  }
  return grid;
}

std::optional<double> improvement(double baseline_risk, double selnet_risk) {
  if (baseline_risk == 0.0) return std::nullopt;
  return 100.0 * (baseline_risk - selnet_risk) / baseline_risk;
}

std::vector<CompareRow> compare_report(
    std::span<const double> coverages, std::span<const Aggregate> selnet,
    std::span<const std::vector<std::optional<Aggregate>>> baselines) {
  if (selnet.size() != coverages.size()) {
    throw ContractError("compare report: coverage grids do not match");
  }
  for (const auto& b : baselines) {
    if (b.size() != coverages.size()) {
      throw ContractError("compare report: coverage grids do not match");
    }
  }
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < coverages.size(); ++i) {
    CompareRow row;
    row.coverage = coverages[i];
    row.selnet = selnet[i];
    for (const auto& b : baselines) {
      row.baselines.push_back(b[i]);
      row.improvements.push_back(
          b[i] ? improvement(b[i]->mean, selnet[i].mean) : std::nullopt);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string curve_csv(std::span<const CurvePoint> curve,
                      const std::string& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  out << "c,achieved_coverage,risk,stderr\n";
  for (const auto& p : curve) {
    out << fixed(p.target_coverage) << ',' << fixed(p.achieved_coverage) << ','
        << fixed(p.risk) << ',' << fixed(p.risk_stderr) << '\n';
  }
  return out.str();
}

std::string grid_csv(std::span<const double> train_coverages,
                     std::span<const double> calibration_coverages,
                     const std::vector<std::vector<double>>& grid,
                     const std::string& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  out << "train_c";
  for (double c : calibration_coverages) out << ",calib_" << fixed(c);
  out << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << fixed(train_coverages[i]);
    for (double v : grid[i]) out << ',' << fixed(v);
    out << '\n';
  }
  return out.str();
}

std::string compare_csv(std::span<const CompareRow> rows,
                        std::span<const std::string> baseline_names,
                        const std::string& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  out << "coverage,selnet,selnet_se";
  for (const auto& name : baseline_names) {
    out << ',' << name << ',' << name << "_se," << name << "_improvement";
  }
  out << '\n';
  for (const auto& row : rows) {
    out << fixed(row.coverage) << ',' << fixed(row.selnet.mean) << ','
        << fixed(row.selnet.standard_error);
    for (std::size_t b = 0; b < row.baselines.size(); ++b) {
      if (row.baselines[b]) {
        out << ',' << fixed(row.baselines[b]->mean) << ','
            << fixed(row.baselines[b]->standard_error);
      } else {
        out << ",NA,NA";
      }
      out << ',' << (row.improvements[b] ? fixed(*row.improvements[b]) : "NA");
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace selnet
