#include <gtest/gtest.h>

#include <fstream>

#include "selnet/config.hpp"
#include "selnet/error.hpp"
#include "selnet/experiment.hpp"
#include "test_support.hpp"

namespace selnet {
namespace {

using nlohmann::json;

json synthetic_doc() {
  return json::parse(R"({
    "data": {"synthetic": {"seed": 1, "samples": 400, "classes": 3, "dims": 4}},
    "split": {"seed": 2, "stratified": true},
    "model": {"body": [{"width": 16, "dropout": 0.2}], "selection_hidden": 8},
    "train": {"optimizer": "sgd", "lr": 0.05, "halving_period": 10, "epochs": 2, "batch_size": 32},
    "loss": {"coverage": 0.8},
    "seeds": [4, 5]
  })");
}

TEST(Config, ParsesSyntheticDocument) {
  const RunConfig c = parse_run_config(synthetic_doc());
  EXPECT_EQ(c.architecture.task, Task::classification(3));
  EXPECT_EQ(c.train.loss.task_loss, TaskLoss::CrossEntropy);
  EXPECT_EQ(c.train.loss.coverage, 0.8);
  EXPECT_EQ(c.train.loss.lambda, 32.0);
  ASSERT_TRUE(std::holds_alternative<SgdConfig>(c.train.optimizer));
  EXPECT_EQ(std::get<SgdConfig>(c.train.optimizer).halving_period, 10u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(c.architecture.body[0].dropout, 0.2);
}

TEST(Config, RejectsBadInput) {
  json doc = synthetic_doc();
  doc["seeds"] = json::array();
  EXPECT_THROW(parse_run_config(doc), ConfigError);
  doc = synthetic_doc();
  doc["model"]["body"][0]["widht"] = 3;
  EXPECT_THROW(parse_run_config(doc), ConfigError);
  doc = synthetic_doc();
  doc["data"]["csv"] = "x.csv";
  EXPECT_THROW(parse_run_config(doc), ConfigError);
  doc = synthetic_doc();
  doc["data"] = {{"csv", "does/not/exist.csv"}};
  EXPECT_THROW(parse_run_config(doc), ConfigError);
  doc = synthetic_doc();
  doc["train"]["optimizer"] = "rmsprop";
  EXPECT_THROW(parse_run_config(doc), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstConfigFile) {
  const RunConfig c = load_run_config(testing::source_path("configs/concrete.json"));
  ASSERT_TRUE(c.data.csv_path.has_value());
  EXPECT_TRUE(std::filesystem::exists(*c.data.csv_path));
  EXPECT_EQ(c.train.epochs, 800u);
  EXPECT_EQ(c.train.batch_size, 256u);
  EXPECT_EQ(std::get<AdamConfig>(c.train.optimizer).lr, 5e-4);
  EXPECT_EQ(std::get<AdamConfig>(c.train.optimizer).weight_decay, 1e-4);
  EXPECT_EQ(c.architecture.body[0].width, 64u);
  EXPECT_EQ(c.architecture.selection_hidden, 16u);
  EXPECT_EQ(c.train.loss.alpha, 0.5);
}

TEST(Config, CanonicalJsonRoundTripsAndHashIsStable) {
  const RunConfig c = parse_run_config(synthetic_doc());
  const RunConfig again = parse_run_config(to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
  EXPECT_EQ(config_hash(again), config_hash(c));
  json changed = synthetic_doc();
  changed["loss"]["coverage"] = 0.7;
  EXPECT_NE(config_hash(parse_run_config(changed)), config_hash(c));
}

TEST(Experiment, PrepareDataStandardizesOnTrainOnly) {
  const RunConfig c = parse_run_config(synthetic_doc());
  const PreparedData d = prepare_data(c, 4);
  EXPECT_EQ(d.raw.train.size() + d.raw.calibration.size() + d.raw.test.size(), 400u);
  EXPECT_EQ(d.normalization, fit_normalization(d.raw.train, true));
  EXPECT_EQ(d.architecture.input_width, 4u);
  const PreparedData again = prepare_data(c, 4);
  EXPECT_EQ(d.raw.index, again.raw.index);
  EXPECT_NE(d.raw.index, prepare_data(c, 5).raw.index);
}

TEST(Experiment, ScoreSplitUsesOriginalUnits) {
  const RunConfig c = load_run_config(testing::source_path("configs/concrete.json"));
  RunConfig quick = c;
  quick.train.epochs = 2;
  const PreparedData d = prepare_data(quick, 0);
  SelectiveNet model = train_selectivenet(quick, d, 0.8, 0);
  const ScoredSplit s = score_split(model, d.raw.test, ScoreSource::Selection, {}, 0);
  EXPECT_EQ(s.labels, d.raw.test.labels);
  double mean_pred = 0.0;
  for (double p : s.predictions) mean_pred += p / static_cast<double>(s.predictions.size());
  // Raw strengths are tens of MPa; standardized outputs would sit near 0.
  EXPECT_GT(mean_pred, 10.0);
  EXPECT_THROW(score_split(model, d.raw.test, ScoreSource::SoftmaxResponse, {}, 0),
               ConfigError);
}

TEST(Experiment, CompareIsDeterministicWithRegressionNaColumns) {
  RunConfig c = load_run_config(testing::source_path("configs/concrete.json"));
  c.train.epochs = 3;
  c.mc_dropout.passes = 5;
  const double cov[] = {1.0, 0.5};
  const std::uint64_t seeds[] = {0, 1};
  const CompareResult a = run_compare(c, cov, seeds);
  const CompareResult b = run_compare(c, cov, seeds);
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(a.rows.size(), 2u);
  EXPECT_NE(a.csv.find(",NA,NA,NA\n"), std::string::npos);
  EXPECT_NE(a.csv.find("config_hash="), std::string::npos);
  EXPECT_NE(a.csv.find("format=1"), std::string::npos);
  EXPECT_NE(a.csv.find("seeds=0,1"), std::string::npos);
}

}  // namespace
}  // namespace selnet
