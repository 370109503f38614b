#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "selnet/checkpoint.hpp"
#include "test_support.hpp"

namespace selnet {
namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SELNET_CLI_PATH) + " " + args + " >" +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// A short synthetic config shared by the CLI tests.
fs::path write_config(const fs::path& dir) {
  const fs::path path = dir / "quick.json";
  std::ofstream(path) << R"({
    "data": {"synthetic": {"seed": 3, "samples": 300, "classes": 3, "dims": 4}},
    "split": {"seed": 1, "stratified": true},
    "model": {"body": [{"width": 16, "dropout": 0.3}], "selection_hidden": 8},
    "train": {"optimizer": "adam", "lr": 0.005, "epochs": 3, "batch_size": 32},
    "loss": {"coverage": 0.8},
    "mc_dropout": {"rate": 0.3, "passes": 5}
  })";
  return path;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    config_ = write_config(dir_);
  }
  fs::path dir_;
  fs::path config_;
};

TEST_F(CliTest, UnknownFlagIsUsageError) {
  EXPECT_EQ(run_cli("train --bogus 1", dir_ / "log"), 2);
  EXPECT_EQ(run_cli("frobnicate", dir_ / "log"), 2);
  EXPECT_EQ(run_cli("", dir_ / "log"), 2);
}

TEST_F(CliTest, RuntimeFailureIsExitOne) {
  const fs::path bad = dir_ / "bad.json";
  std::ofstream(bad) << "{\"data\": {\"csv\": \"nope.csv\"}, \"model\": {\"body\": []}}";
  EXPECT_EQ(run_cli("train --config " + bad.string() + " --out " + (dir_ / "o").string(),
                    dir_ / "log"),
            1);
  EXPECT_NE(slurp(dir_ / "log").find("error:"), std::string::npos);
}

TEST_F(CliTest, TrainCalibrateEvaluateCurveGrid) {
  const fs::path t = dir_ / "train";
  ASSERT_EQ(run_cli("train --config " + config_.string() + " --seed 2 --out " + t.string(),
                    dir_ / "log"),
            0)
      << slurp(dir_ / "log");
  for (const char* f : {"model.ckpt", "history.csv", "calibration.csv", "test.csv",
                        "effective_config.json"}) {
    ASSERT_TRUE(fs::exists(t / f)) << f;
    EXPECT_GT(fs::file_size(t / f), 0u) << f;
  }
  const std::string history = slurp(t / "history.csv");
  EXPECT_EQ(history.rfind("# selnet train format=1 config_hash=", 0), 0u);
  EXPECT_NE(history.find("seeds=2"), std::string::npos);

  const fs::path cal = dir_ / "cal";
  ASSERT_EQ(run_cli("calibrate --model " + (t / "model.ckpt").string() + " --data " +
                        (t / "calibration.csv").string() + " --coverage 0.7 --delta 0.05 --out " +
                        cal.string(),
                    dir_ / "log"),
            0)
      << slurp(dir_ / "log");
  const Checkpoint ckpt = load_model((cal / "model.ckpt").string());
  ASSERT_TRUE(ckpt.calibration.has_value());
  EXPECT_EQ(ckpt.calibration->target_coverage, 0.7);
  EXPECT_GE(ckpt.calibration->achieved_coverage, 0.7);
  EXPECT_NE(slurp(cal / "calibration.txt").find("epsilon="), std::string::npos);

  const fs::path ev = dir_ / "eval";
  ASSERT_EQ(run_cli("evaluate --model " + (cal / "model.ckpt").string() + " --data " +
                        (t / "test.csv").string() + " --tau 0 --out " + ev.string(),
                    dir_ / "log"),
            0);
  EXPECT_NE(slurp(dir_ / "log").find("coverage=1.000000"), std::string::npos);
  EXPECT_GT(fs::file_size(ev / "eval.csv"), 0u);

  for (const char* score : {"g", "sr", "mcdropout"}) {
    const fs::path cv = dir_ / (std::string("curve_") + score);
    ASSERT_EQ(run_cli("curve --model " + (t / "model.ckpt").string() + " --data " +
                          (t / "test.csv").string() + " --calib " +
                          (t / "calibration.csv").string() +
                          " --coverages 1.0,0.8,0.6 --mc-passes 4 --score " + score +
                          " --out " + cv.string(),
                      dir_ / "log"),
              0)
        << score << slurp(dir_ / "log");
    const std::string curve = slurp(cv / "curve.csv");
    EXPECT_NE(curve.find("c,achieved_coverage,risk,stderr"), std::string::npos);
    EXPECT_NE(curve.find("\n1.000000,1.000000,"), std::string::npos) << curve;
  }

  const fs::path gd = dir_ / "grid";
  const std::string m = (t / "model.ckpt").string();
  ASSERT_EQ(run_cli("grid --models " + m + "," + m + " --data " + (t / "test.csv").string() +
                        " --coverages 0.9,0.8 --out " + gd.string(),
                    dir_ / "log"),
            0)
      << slurp(dir_ / "log");
  EXPECT_NE(slurp(gd / "grid.csv").find("train_c,calib_0.900000,calib_0.800000"),
            std::string::npos);
}

TEST_F(CliTest, CalibrateWarnsWhenDataIsTheTrainingFile) {
  const fs::path csv = dir_ / "data.csv";
  {
    std::ofstream out(csv);
    out << "a,b,y\n";
    Rng rng(1);
    for (int i = 0; i < 60; ++i) {
      const double a = rng.normal();
      const double b = rng.normal();
      out << a << ',' << b << ',' << 2 * a - b << '\n';
    }
  }
  const fs::path cfg = dir_ / "reg.json";
  std::ofstream(cfg) << R"({"data": {"csv": "data.csv", "target": "y"},
    "model": {"body": [{"width": 8}]}, "train": {"epochs": 2, "batch_size": 16}})";
  ASSERT_EQ(run_cli("train --config " + cfg.string() + " --out " + (dir_ / "t").string(),
                    dir_ / "log"),
            0)
      << slurp(dir_ / "log");
  ASSERT_EQ(run_cli("calibrate --model " + (dir_ / "t" / "model.ckpt").string() + " --data " +
                        csv.string() + " --coverage 0.5 --out " + (dir_ / "c").string(),
                    dir_ / "log"),
            0);
  EXPECT_NE(slurp(dir_ / "log").find("warning:"), std::string::npos);
}

TEST_F(CliTest, CompareTwiceIsByteIdentical) {
  const std::string base = "compare --config " + config_.string() +
                           " --coverages 1.0,0.8 --seeds 0,1 --out ";
  ASSERT_EQ(run_cli(base + (dir_ / "a").string(), dir_ / "log"), 0) << slurp(dir_ / "log");
  ASSERT_EQ(run_cli(base + (dir_ / "b").string(), dir_ / "log"), 0);
  const std::string a = slurp(dir_ / "a" / "compare.csv");
  EXPECT_EQ(a, slurp(dir_ / "b" / "compare.csv"));
  EXPECT_NE(a.find("coverage,selnet,selnet_se,mc_dropout"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "effective_config.json"));
}

TEST_F(CliTest, OutputRootFromEnvironment) {
  const fs::path root = dir_ / "root";
  const std::string cmd = "SELNET_OUT_ROOT=" + root.string() + " " +
                          std::string(SELNET_CLI_PATH) + " train --config " +
                          config_.string() + " >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(root / "train" / "model.ckpt"));
}

}  // namespace
}  // namespace selnet
