#include <gtest/gtest.h>

#include <cmath>

#include "selnet/error.hpp"
#include "selnet/layers.hpp"
#include "test_support.hpp"

namespace selnet {
namespace {

DenseLayer make_dense(std::size_t in, std::size_t out, std::vector<double> w,
                      std::vector<double> b) {
  Rng rng(0);
  DenseLayer layer(in, out, Init::GlorotUniform, rng);
  std::copy(w.begin(), w.end(), layer.weight().mutable_values().begin());
  std::copy(b.begin(), b.end(), layer.bias().mutable_values().begin());
  return layer;
}

TEST(Dense, IdentityWeightsPassInputThrough) {
  const DenseLayer layer = make_dense(2, 2, {1, 0, 0, 1}, {0, 0});
  const Tensor x = Tensor::matrix(2, 2, {0.5, -1, 3, 4});
  const Tensor y = layer.forward(x);
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
            std::vector<double>(x.values().begin(), x.values().end()));
}

TEST(Dense, HandEvaluatedOutput) {
  const DenseLayer layer = make_dense(2, 1, {1, 2}, {0.5});
  EXPECT_EQ(layer.forward(Tensor::matrix(1, 2, {1, 1})).item(), 3.5);
}

TEST(Dense, EmptyBatchKeepsWidth) {
  const DenseLayer layer = make_dense(2, 3, {1, 2, 3, 4, 5, 6}, {0, 0, 0});
  EXPECT_EQ(layer.forward(Tensor::zeros({0, 2})).shape(), (Shape{0, 3}));
}

TEST(Dense, WidthMismatchAndZeroWidth) {
  const DenseLayer layer = make_dense(2, 1, {1, 2}, {0});
  EXPECT_THROW(layer.forward(Tensor::zeros({1, 3})), DimensionError);
  Rng rng(0);
  EXPECT_THROW(DenseLayer(0, 2, Init::HeUniform, rng), ConfigError);
}

TEST(Dense, InitLimitsFollowFanCounts) {
  Rng rng(4);
  const DenseLayer he(50, 40, Init::HeUniform, rng);
  const DenseLayer glorot(50, 40, Init::GlorotUniform, rng);
  const double he_limit = std::sqrt(6.0 / 50.0);
  const double glorot_limit = std::sqrt(6.0 / 90.0);
  double he_max = 0.0;
  double glorot_max = 0.0;
  for (double w : he.weight().values()) he_max = std::max(he_max, std::abs(w));
  for (double w : glorot.weight().values()) glorot_max = std::max(glorot_max, std::abs(w));
  EXPECT_LE(he_max, he_limit);
  EXPECT_GT(he_max, 0.95 * he_limit);
  EXPECT_LE(glorot_max, glorot_limit);
  EXPECT_GT(glorot_max, 0.95 * glorot_limit);
  for (double b : he.bias().values()) EXPECT_EQ(b, 0.0);
}

TEST(Dense, CopiesOwnParameters) {
  DenseLayer a = make_dense(1, 1, {2}, {0});
  DenseLayer b = a;
  b.weight().mutable_values()[0] = 7.0;
  EXPECT_EQ(a.weight().item(), 2.0);
}

TEST(BatchNorm, HandNormalizedColumn) {
  BatchNormLayer bn(1);
  const Tensor y = bn.forward(Tensor::matrix(2, 1, {1, 3}), Mode::Train);
  EXPECT_NEAR(y.at(0), -1.0, 1e-4);
  EXPECT_NEAR(y.at(1), 1.0, 1e-4);
  // Running stats: 0.9 * init + 0.1 * batch (unbiased variance 2).
  EXPECT_NEAR(bn.running_mean()[0], 0.2, 1e-15);
  EXPECT_NEAR(bn.running_var()[0], 0.9 + 0.1 * 2.0, 1e-15);
}

TEST(BatchNorm, StandardizedInputIsAFixedPoint) {
  BatchNormLayer bn(1);
  const Tensor x = Tensor::matrix(4, 1, {-1, 1, -1, 1});
  const Tensor y = bn.forward(x, Mode::Train);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y.at(i), x.at(i), 1e-5);
}

TEST(BatchNorm, TrainOutputMomentsOnRandomBatches) {
  Rng rng(9);
  BatchNormLayer bn(3);
  const Tensor x = testing::random_tensor({32, 3}, rng, -5, 9, false);
  const Tensor y = bn.forward(x, Mode::Train);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0;
    double v = 0.0;
    for (std::size_t i = 0; i < 32; ++i) m += y.at(i, j) / 32.0;
    for (std::size_t i = 0; i < 32; ++i) v += (y.at(i, j) - m) * (y.at(i, j) - m) / 32.0;
    EXPECT_LT(std::abs(m), 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(BatchNorm, EvalIsStatelessAndUsesRunningStats) {
  BatchNormLayer bn(1);
  bn.running_mean()[0] = 2.0;
  bn.running_var()[0] = 4.0;
  const Tensor x = Tensor::matrix(1, 1, {6.0});
  const double a = bn.forward(x, Mode::Eval).item();
  const double b = bn.forward(x, Mode::Eval).item();
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a, 4.0 / std::sqrt(4.0 + 1e-5), 1e-15);
  EXPECT_EQ(bn.running_mean()[0], 2.0);
}

TEST(BatchNorm, TrainBatchOfOneIsContractError) {
  BatchNormLayer bn(2);
  EXPECT_THROW(bn.forward(Tensor::zeros({1, 2}), Mode::Train), ContractError);
  EXPECT_NO_THROW(bn.forward(Tensor::zeros({1, 2}), Mode::Eval));
}

TEST(Dropout, ZeroRateIsIdentityInEveryMode) {
  const DropoutLayer d(0.0);
  Rng rng(1);
  const Tensor x = Tensor::matrix(1, 3, {1, 2, 3});
  for (Mode m : {Mode::Train, Mode::Eval, Mode::ForcedActive}) {
    const Tensor y = d.forward(x, m, &rng);
    EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
              (std::vector<double>{1, 2, 3}));
  }
}

TEST(Dropout, EvalIsIdentityAtHalfRate) {
  const DropoutLayer d(0.5);
  const Tensor x = Tensor::matrix(1, 3, {1, 2, 3});
  const Tensor y = d.forward(x, Mode::Eval, nullptr);
  EXPECT_EQ(y.at(2), 3.0);
}

TEST(Dropout, ForcedActiveMaskIsReproducible) {
  const DropoutLayer d(0.5);
  const Tensor x = Tensor::full({4, 8}, 1.0);
  Rng a(77);
  Rng b(77);
  const Tensor ya = d.forward(x, Mode::ForcedActive, &a);
  const Tensor yb = d.forward(x, Mode::ForcedActive, &b);
  EXPECT_EQ(std::vector<double>(ya.values().begin(), ya.values().end()),
            std::vector<double>(yb.values().begin(), yb.values().end()));
  for (double v : ya.values()) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(Dropout, InvalidRateAndMissingRng) {
  EXPECT_THROW(DropoutLayer(1.0), ConfigError);
  EXPECT_THROW(DropoutLayer(-0.1), ConfigError);
  const DropoutLayer d(0.3);
  EXPECT_THROW(d.forward(Tensor::zeros({1, 1}), Mode::Train, nullptr), ContractError);
}

TEST(Dropout, TrainExpectationMatchesInput) {
  const DropoutLayer d(0.3);
  Rng rng(2024);
  const Tensor x = Tensor::full({100000, 1}, 2.0);
  const Tensor y = d.forward(x, Mode::Train, &rng);
  double total = 0.0;
  for (double v : y.values()) total += v;
  EXPECT_NEAR(total / 100000.0, 2.0, 0.02);
}

TEST(Dropout, RateOverrideAppliesInForcedMode) {
  const DropoutLayer d(0.0);
  Rng rng(3);
  const Tensor y = d.forward(Tensor::full({1, 200}, 1.0), Mode::ForcedActive, &rng, 0.5);
  int zeros = 0;
  for (double v : y.values()) zeros += v == 0.0;
  EXPECT_GT(zeros, 60);
  EXPECT_LT(zeros, 140);
}

}  // namespace
}  // namespace selnet
