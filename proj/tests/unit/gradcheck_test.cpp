#include <gtest/gtest.h>

#include "selnet/error.hpp"
#include "selnet/gradcheck.hpp"
#include "selnet/layers.hpp"
#include "selnet/loss.hpp"
#include "selnet/model.hpp"
#include "test_support.hpp"

namespace selnet {
namespace {

using testing::random_off_kink;
using testing::random_tensor;

TEST(FiniteDifference, QuadraticFormIsNearlyExact) {
  Rng rng(1);
  const Tensor a = random_tensor({3, 3}, rng, -1, 1, false);
  std::vector<Tensor> params{random_tensor({3, 1}, rng)};
  const auto result = finite_difference_check(
      [&] {
        const Tensor& x = params[0];
        return sum(mul(x, matmul(a, x)));
      },
      params);
  EXPECT_LT(result.max_relative_error, 1e-9);
  EXPECT_EQ(result.coordinates, 3u);
}

TEST(FiniteDifference, ConstantFunctionHasZeroGradients) {
  std::vector<Tensor> params{Tensor::vector(std::vector<double>{1, 2}, true)};
  const auto result = finite_difference_check(
      [&] { return sum(params[0] * 0.0) + 4.0; }, params);
  EXPECT_EQ(result.max_relative_error, 0.0);
  EXPECT_EQ(result.analytic, 0.0);
  EXPECT_EQ(result.numeric, 0.0);
}

TEST(FiniteDifference, NonDeterministicFunctionIsOracleError) {
  std::vector<Tensor> params{Tensor::scalar(1.0, true)};
  int calls = 0;
  EXPECT_THROW(finite_difference_check(
                   [&] { return params[0] * static_cast<double>(++calls); },
                   params),
               OracleError);
}

TEST(FiniteDifference, DetectsAWrongGradient) {
  // A function whose value uses x but whose tape only sees half of it.
  std::vector<Tensor> params{Tensor::scalar(0.8, true)};
  const auto result = finite_difference_check(
      [&] {
        const Tensor& x = params[0];
        return square(x) + square(x.detach());
      },
      params);
  EXPECT_GT(result.max_relative_error, 0.4);
}

TEST(FiniteDifference, RandomMlpGradientsOverSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<Tensor> params{random_tensor({4, 5}, rng), random_tensor({5}, rng),
                               random_tensor({5, 3}, rng), random_tensor({3}, rng),
                               random_tensor({3, 1}, rng)};
    const Tensor x = random_tensor({6, 4}, rng, -1, 1, false);
    const auto result = finite_difference_check(
        [&] {
          Tensor h = sigmoid(add_row_vector(matmul(x, params[0]), params[1]));
          h = exp(add_row_vector(matmul(h, params[2]), params[3]) * 0.5);
          return mean(square(matmul(h, params[4])));
        },
        params);
    EXPECT_LT(result.max_relative_error, 1e-5) << "seed " << seed;
  }
}

TEST(FiniteDifference, LayersAndSelectiveLoss) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ArchitectureConfig config;
    config.input_width = 3;
    config.body = {{6, Activation::Relu, true, std::nullopt}};
    config.task = Task::classification(3);
    config.selection_hidden = 4;
    SelectiveNet model = SelectiveNet::build(config, seed);
    const Tensor x = random_tensor({8, 3}, rng, -2, 2, false);
    std::vector<double> labels(8);
    for (auto& y : labels) y = static_cast<double>(rng.below(3));
    LossConfig loss{0.9, 32.0, 0.5, TaskLoss::CrossEntropy};
    auto params = model.parameters();
    const auto result = finite_difference_check(
        [&] {
          const HeadOutputs out = model.forward(x, Mode::Eval);
          const Tensor sel = selective_loss(
              task_loss(TaskLoss::CrossEntropy, out.f, labels), out.g, loss);
          const Tensor aux =
              auxiliary_loss(task_loss(TaskLoss::CrossEntropy, out.h, labels));
          return total_loss(sel, aux, loss.alpha);
        },
        params);
    EXPECT_LT(result.max_relative_error, 1e-5) << "seed " << seed;
  }
}

TEST(FiniteDifference, BatchNormTrainPath) {
  Rng rng(11);
  std::vector<Tensor> params{random_tensor({4}, rng, 0.5, 1.5),
                             random_tensor({4}, rng), random_off_kink({5, 4}, rng)};
  const Tensor w = random_tensor({4, 1}, rng, -1, 1, false);
  const auto result = finite_difference_check(
      [&] {
        std::vector<double> m;
        std::vector<double> v;
        const Tensor y = batch_norm_train(params[2], params[0], params[1], 1e-5, m, v);
        return sum(square(matmul(y, w)));
      },
      params);
  EXPECT_LT(result.max_relative_error, 1e-5);
}

}  // namespace
}  // namespace selnet
