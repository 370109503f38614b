#include <gtest/gtest.h>

#include <cmath>

#include "selnet/dataset.hpp"
#include "selnet/error.hpp"
#include "selnet/optimizer.hpp"
#include "selnet/train.hpp"
#include "test_support.hpp"

namespace selnet {
namespace {

TEST(Sgd, VanillaStep) {
  std::vector<double> theta{0.0};
  std::vector<double> v{0.0};
  const std::vector<double> grad{1.0};
  SgdConfig config{0.1, 0.0, 0.0, 0};
  sgd_step(theta, grad, v, config, 0.1);
  EXPECT_DOUBLE_EQ(theta[0], -0.1);
}

TEST(Sgd, MomentumRecursion) {
  std::vector<double> theta{0.0};
  std::vector<double> v{0.0};
  const std::vector<double> grad{1.0};
  SgdConfig config{0.1, 0.9, 0.0, 0};
  sgd_step(theta, grad, v, config, 0.1);
  sgd_step(theta, grad, v, config, 0.1);
  EXPECT_NEAR(v[0], 1.9, 1e-15);
  EXPECT_NEAR(theta[0], -0.29, 1e-15);
}

TEST(Sgd, StationaryAndSizeChecked) {
  std::vector<double> theta{0.7, -2.0};
  std::vector<double> v{0.0, 0.0};
  sgd_step(theta, std::vector<double>{0, 0}, v, SgdConfig{}, 0.1);
  EXPECT_EQ(theta, (std::vector<double>{0.7, -2.0}));
  EXPECT_THROW(sgd_step(theta, std::vector<double>{0}, v, SgdConfig{}, 0.1),
               ContractError);
}

TEST(Sgd, WeightDecayIsCoupled) {
  std::vector<double> theta{2.0};
  std::vector<double> v{0.0};
  sgd_step(theta, std::vector<double>{0.0}, v, SgdConfig{0.1, 0.0, 0.5, 0}, 0.1);
  EXPECT_NEAR(theta[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {1e-3, 0.5, -7.0, 300.0}) {
    std::vector<double> theta{1.0};
    std::vector<double> m{0.0};
    std::vector<double> v{0.0};
    AdamConfig config;
    adam_step(theta, std::vector<double>{g}, m, v, 1, config, config.lr);
    EXPECT_NEAR(std::abs(theta[0] - 1.0), config.lr, 1e-6) << g;
  }
}

TEST(Adam, MatchesHandRecursion) {
  std::vector<double> theta{0.5};
  std::vector<double> m{0.0};
  std::vector<double> v{0.0};
  AdamConfig config{0.01, 0.9, 0.999, 1e-8, 0.1};
  const double grads[] = {0.3, -0.2, 0.7};
  double t = 0.5;
  double em = 0.0;
  double ev = 0.0;
  for (int step = 1; step <= 3; ++step) {
    const double g = grads[step - 1];
    adam_step(theta, std::vector<double>{g}, m, v, step, config, config.lr);
    em = 0.9 * em + 0.1 * g;
    ev = 0.999 * ev + 0.001 * g * g;
    const double mh = em / (1 - std::pow(0.9, step));
    const double vh = ev / (1 - std::pow(0.999, step));
    t = t - 0.01 * mh / (std::sqrt(vh) + 1e-8) - 0.01 * 0.1 * t;
    EXPECT_NEAR(theta[0], t, 1e-15);
  }
}

TEST(Adam, ZeroGradientIsIdentity) {
  std::vector<double> theta{0.3, 4.0};
  std::vector<double> m{0.0, 0.0};
  std::vector<double> v{0.0, 0.0};
  adam_step(theta, std::vector<double>{0, 0}, m, v, 1, AdamConfig{}, 5e-4);
  EXPECT_EQ(theta, (std::vector<double>{0.3, 4.0}));
}

TEST(Schedule, HalvingEveryPeriod) {
  const OptimizerConfig sgd = SgdConfig{0.1, 0.9, 0.0, 25};
  EXPECT_EQ(lr_schedule(0, sgd), 0.1);
  EXPECT_EQ(lr_schedule(24, sgd), 0.1);
  EXPECT_EQ(lr_schedule(25, sgd), 0.05);
  EXPECT_NEAR(lr_schedule(75, sgd), 0.0125, 1e-15);
  double prev = 1.0;
  for (std::size_t e = 0; e < 200; ++e) {
    EXPECT_LE(lr_schedule(e, sgd), prev);
    prev = lr_schedule(e, sgd);
  }
  EXPECT_EQ(lr_schedule(500, OptimizerConfig{AdamConfig{}}), 5e-4);
}

TEST(Optimizer, ValidationRejectsBadRates) {
  EXPECT_THROW(validate(OptimizerConfig{SgdConfig{0.0, 0.9, 0, 0}}), ConfigError);
  EXPECT_THROW(validate(OptimizerConfig{AdamConfig{-1.0}}), ConfigError);
}

TEST(Batches, TrailingSingletonIsMerged) {
  std::vector<std::size_t> order(9);
  for (std::size_t i = 0; i < 9; ++i) order[i] = i;
  const auto batches = make_batches(order, 4, 2);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[1].size(), 5u);
  const auto kept = make_batches(order, 3, 2);
  EXPECT_EQ(kept.size(), 3u);
  const auto partial = make_batches(std::vector<std::size_t>(order.begin(), order.begin() + 7), 4, 2);
  ASSERT_EQ(partial.size(), 2u);
  EXPECT_EQ(partial[1].size(), 3u);
}

ArchitectureConfig small_classifier(std::size_t d, std::size_t k) {
  ArchitectureConfig c;
  c.input_width = d;
  c.body = {{32, Activation::Relu, true, std::nullopt}};
  c.task = Task::classification(k);
  c.selection_hidden = 16;
  return c;
}

Dataset noisy_set(std::uint64_t seed, double eta) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.samples = 1200;
  spec.classes = 4;
  spec.dims = 4;
  spec.noise_fraction = eta;
  return standardize(synth_classification(spec));
}

TrainConfig classifier_training(double c, std::uint64_t seed) {
  TrainConfig t;
  t.optimizer = AdamConfig{0.003};
  t.epochs = 25;
  t.batch_size = 64;
  t.seed = seed;
  t.loss = {c, 32.0, 0.5, TaskLoss::CrossEntropy};
  return t;
}

TEST(Train, IdenticalSeedsGiveIdenticalHistoryAndParameters) {
  const Dataset data = noisy_set(1, 0.2);
  auto run = [&] {
    SelectiveNet model = SelectiveNet::build(small_classifier(4, 4), 3);
    TrainConfig t = classifier_training(0.8, 3);
    t.epochs = 3;
    const TrainHistory h = train(model, data, t);
    std::vector<double> params;
    for (const auto& p : model.parameters()) params.insert(params.end(), p.values().begin(), p.values().end());
    return std::make_pair(h, params);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_EQ(a.first.epochs.size(), 3u);
}

TEST(Train, SoftCoverageTracksTargetOnNoisyData) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset data = noisy_set(seed, 0.3);
    SelectiveNet model = SelectiveNet::build(small_classifier(4, 4), seed);
    const TrainHistory h = train(model, data, classifier_training(0.7, seed));
    const double phi = h.epochs.back().soft_coverage;
    EXPECT_GE(phi, 0.6) << "seed " << seed;
    EXPECT_LE(phi, 0.85) << "seed " << seed;
    EXPECT_EQ(model.trained_coverage(), 0.7);
  }
}

TEST(Train, SelectionScoresNoiseBelowClean) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset data = noisy_set(100 + seed, 0.3);
    SelectiveNet model = SelectiveNet::build(small_classifier(4, 4), seed);
    TrainConfig t = classifier_training(0.7, seed);
    t.loss.alpha = 1.0;
    train(model, data, t);
    const Tensor g = model.forward(data.features.to_tensor(), Mode::Eval).g;
    double noise = 0.0;
    double clean = 0.0;
    std::size_t n_noise = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.provenance.noise[i]) {
        noise += g.at(i);
        ++n_noise;
      } else {
        clean += g.at(i);
      }
    }
    const double gap = clean / static_cast<double>(data.size() - n_noise) -
                       noise / static_cast<double>(n_noise);
    EXPECT_GT(gap, 0.1) << "seed " << seed;
  }
}

TEST(Train, ConcreteLossDecreases) {
  const Dataset raw = load_csv(testing::source_path("data/concrete.csv"),
                               CsvSchema{{}, "compressive_strength", true, Task::regression()});
  const Dataset data = standardize(raw, std::nullopt, true);
  SelectiveNet model =
      SelectiveNet::build(ArchitectureConfig::regression_default(data.width()), 0);
  TrainConfig t;
  t.optimizer = AdamConfig{5e-4, 0.9, 0.999, 1e-8, 1e-4};
  t.epochs = 30;
  t.batch_size = 256;
  t.loss = {0.8, 32.0, 0.5, TaskLoss::Squared};
  const TrainHistory h = train(model, data, t);
  EXPECT_LT(h.epochs.back().total_loss, h.epochs.front().total_loss);
}

TEST(Train, BaselineUsesPlainLoss) {
  const Dataset data = noisy_set(4, 0.0);
  SelectiveNet model = SelectiveNet::baseline(small_classifier(4, 4), 4);
  TrainConfig t = classifier_training(1.0, 4);
  t.epochs = 5;
  const TrainHistory h = train(model, data, t);
  EXPECT_EQ(h.epochs.back().soft_coverage, 1.0);
  EXPECT_EQ(h.epochs.back().total_loss, h.epochs.back().selective_loss);
}

TEST(Train, MismatchedTaskLossIsConfigError) {
  const Dataset data = noisy_set(4, 0.0);
  SelectiveNet model = SelectiveNet::build(small_classifier(4, 4), 4);
  TrainConfig t = classifier_training(0.8, 4);
  t.loss.task_loss = TaskLoss::Squared;
  EXPECT_THROW(train(model, data, t), ConfigError);
}

TEST(Train, DivergenceNamesEpochAndBatch) {
  const Dataset data = noisy_set(5, 0.0);
  SelectiveNet model = SelectiveNet::build(small_classifier(4, 4), 5);
  model.selection_head_parameters().back().mutable_values()[0] = std::nan("");
  TrainConfig t = classifier_training(0.8, 5);
  t.epochs = 1;
  try {
    train(model, data, t);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  } catch (const DomainError&) {
    // Debug builds trip the non-finite check first.
  }
}

TEST(Train, CheckpointCallbackFires) {
  const Dataset data = noisy_set(6, 0.0);
  SelectiveNet model = SelectiveNet::build(small_classifier(4, 4), 6);
  TrainConfig t = classifier_training(0.8, 6);
  t.epochs = 4;
  t.checkpoint_every = 2;
  std::vector<std::size_t> seen;
  t.on_checkpoint = [&](std::size_t epoch, SelectiveNet&) { seen.push_back(epoch); };
  train(model, data, t);
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 3}));
}

TEST(Train, LinearModelSeparatesCleanClusters) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Dataset data = noisy_set(200 + seed, 0.0);
    ArchitectureConfig c;
    c.input_width = 4;
    c.body = {{4, Activation::Linear, false, std::nullopt}};
    c.task = Task::classification(4);
    SelectiveNet model = SelectiveNet::baseline(c, seed);
    TrainConfig t = classifier_training(1.0, seed);
    t.optimizer = AdamConfig{0.02};
    t.epochs = 30;
    train(model, data, t);
    const Tensor f = model.forward(data.features.to_tensor(), Mode::Eval).f;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < 4; ++j) {
        if (f.at(i, j) > f.at(i, best)) best = j;
      }
      correct += static_cast<double>(best) == data.labels[i];
    }
    EXPECT_GE(static_cast<double>(correct) / static_cast<double>(data.size()), 0.99)
        << "seed " << seed;
  }
}

}  // namespace
}  // namespace selnet
