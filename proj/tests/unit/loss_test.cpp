#include <gtest/gtest.h>

#include <cmath>

#include "selnet/error.hpp"
#include "selnet/loss.hpp"
#include "test_support.hpp"

namespace selnet {
namespace {

Tensor vec(std::vector<double> v, bool rg = false) {
  return Tensor::vector(v, rg);
}

TEST(TaskLoss, CrossEntropyCases) {
  const std::vector<double> label{1};
  EXPECT_EQ(task_loss(TaskLoss::CrossEntropy, Tensor::matrix(1, 2, {0, 1}), label).item(),
            0.0);
  const Tensor uniform = Tensor::full({1, 10}, 0.1);
  EXPECT_NEAR(task_loss(TaskLoss::CrossEntropy, uniform, std::vector<double>{3}).item(),
              2.302585, 1e-6);
  // Zero probability is clamped rather than producing infinity.
  EXPECT_NEAR(task_loss(TaskLoss::CrossEntropy, Tensor::matrix(1, 2, {1, 0}), label).item(),
              -std::log(1e-12), 1e-9);
  EXPECT_THROW(task_loss(TaskLoss::CrossEntropy, uniform, std::vector<double>{10}),
               DataError);
}

TEST(TaskLoss, Squared) {
  EXPECT_EQ(task_loss(TaskLoss::Squared, vec({3}), std::vector<double>{1}).item(), 4.0);
}

TEST(Psi, DefinitionCases) {
  EXPECT_EQ(psi(-0.2), 0.0);
  EXPECT_EQ(psi(0.0), 0.0);
  EXPECT_NEAR(psi(0.1), 0.01, 1e-12);
  EXPECT_EQ(psi(vec({-0.2, 0.0})).values()[0], 0.0);
}

TEST(Psi, ConvexNonnegativeZeroOnNegatives) {
  for (double a = -2.0; a <= 2.0; a += 0.125) {
    EXPECT_GE(psi(a), 0.0);
    EXPECT_EQ(psi(a) == 0.0, a <= 0.0);
    EXPECT_LE(psi(a), 0.5 * (psi(a - 0.25) + psi(a + 0.25)));
  }
  const Tensor a = Tensor::scalar(0.3, true);
  psi(a).backward();
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
}

TEST(Coverage, Means) {
  EXPECT_EQ(empirical_coverage(vec({1, 1, 1})).item(), 1.0);
  EXPECT_EQ(empirical_coverage(vec({1, 0, 1, 0})).item(), 0.5);
  EXPECT_EQ(empirical_coverage(vec({0.2, 0.8, 0.5, 0.5})).item(), 0.5);
  EXPECT_THROW(empirical_coverage(Tensor::zeros({0})), ContractError);
}

TEST(SelectiveRisk, HandCases) {
  EXPECT_EQ(empirical_selective_risk(vec({1, 0, 1, 0}), vec({1, 1, 0, 0})).item(), 0.5);
  EXPECT_NEAR(empirical_selective_risk(vec({1, 2, 6}), vec({1, 1, 1})).item(), 3.0, 1e-15);
  EXPECT_THROW(empirical_selective_risk(vec({1, 2}), vec({0, 0})),
               DegenerateCoverageError);
}

TEST(SelectiveRisk, GradientThroughNumeratorAndDenominator) {
  const Tensor g = vec({0.5, 0.25}, true);
  const Tensor l = vec({2, 4}, true);
  empirical_selective_risk(l, g).backward();
  // r = (l0 g0 + l1 g1) / (g0 + g1); dr/dg_i = (l_i - r) / (g0 + g1).
  const double r = (2 * 0.5 + 4 * 0.25) / 0.75;
  EXPECT_NEAR(g.grad()[0], (2 - r) / 0.75, 1e-14);
  EXPECT_NEAR(g.grad()[1], (4 - r) / 0.75, 1e-14);
  EXPECT_NEAR(l.grad()[0], 0.5 / 0.75, 1e-14);
}

TEST(SelectiveLoss, HandEvaluatedCase) {
  const LossConfig config{0.9, 32.0, 0.5, TaskLoss::Squared};
  EXPECT_NEAR(selective_loss(vec({1, 0}), vec({1, 0}), config).item(), 6.12, 1e-12);
}

TEST(SelectiveLoss, PenaltyVanishesWhenSatisfiedOrOff) {
  const Tensor l = vec({1, 3, 0.5});
  const Tensor g = vec({0.9, 0.95, 1.0});
  const double r = empirical_selective_risk(l, g).item();
  EXPECT_EQ(selective_loss(l, g, {0.9, 32.0, 0.5, TaskLoss::Squared}).item(), r);
  EXPECT_EQ(selective_loss(l, vec({0.1, 0.2, 0.3}), {0.9, 0.0, 0.5, TaskLoss::Squared}).item(),
            empirical_selective_risk(l, vec({0.1, 0.2, 0.3})).item());
}

TEST(SelectiveLoss, AllOnesAtFullCoverageIsPlainMean) {
  const Tensor l = vec({0.3, 1.7, 2.25, 0.0});
  const double plain = mean(l).item();
  for (double lambda : {0.0, 1.0, 32.0, 1e6}) {
    EXPECT_EQ(selective_loss(l, vec({1, 1, 1, 1}), {1.0, lambda, 0.5, TaskLoss::Squared}).item(),
              plain);
  }
}

TEST(SelectiveLoss, PenaltyMonotoneInG) {
  const LossConfig config{0.8, 32.0, 0.5, TaskLoss::Squared};
  double previous = -1.0;
  for (double scale = 1.0; scale >= 0.1; scale -= 0.1) {
    const Tensor g = vec({0.9 * scale, 0.7 * scale, 0.8 * scale});
    const double penalty =
        config.lambda * psi(config.coverage - empirical_coverage(g).item());
    EXPECT_GE(penalty, previous);
    previous = penalty;
  }
}

TEST(AuxiliaryLoss, Means) {
  EXPECT_EQ(auxiliary_loss(vec({2, 4})).item(), 3.0);
  EXPECT_EQ(auxiliary_loss(vec({0, 0})).item(), 0.0);
  EXPECT_EQ(auxiliary_loss(vec({1.25})).item(), 1.25);
  EXPECT_THROW(auxiliary_loss(Tensor::zeros({0})), ContractError);
}

TEST(TotalLoss, ConvexCombination) {
  const Tensor s = Tensor::scalar(6.12);
  const Tensor a = Tensor::scalar(3.0);
  EXPECT_NEAR(total_loss(s, a, 0.5).item(), 4.56, 1e-12);
  EXPECT_EQ(total_loss(s, a, 1.0).item(), 6.12);
  EXPECT_EQ(total_loss(s, a, 0.0).item(), 3.0);
  EXPECT_THROW(total_loss(s, a, 1.5), ConfigError);
  EXPECT_THROW(total_loss(s, a, -0.1), ConfigError);
}

TEST(LossConfig, Validation) {
  EXPECT_THROW((LossConfig{0.0, 32, 0.5, TaskLoss::Squared}.validate()), ConfigError);
  EXPECT_THROW((LossConfig{1.1, 32, 0.5, TaskLoss::Squared}.validate()), ConfigError);
  EXPECT_THROW((LossConfig{0.5, -1, 0.5, TaskLoss::Squared}.validate()), ConfigError);
  EXPECT_NO_THROW((LossConfig{1.0, 0, 0, TaskLoss::Squared}.validate()));
}

}  // namespace
}  // namespace selnet
