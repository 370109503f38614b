#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "selnet/dataset.hpp"
#include "selnet/loss.hpp"
#include "selnet/model.hpp"
#include "selnet/optimizer.hpp"

namespace selnet {

struct TrainConfig {
  OptimizerConfig optimizer = AdamConfig{};
  std::size_t epochs = 1;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  LossConfig loss;
  bool shuffle = true;
  // Calls `on_checkpoint` after every `checkpoint_every` epochs; 0 disables.
  std::size_t checkpoint_every = 0;
  std::function<void(std::size_t epoch, SelectiveNet& model)> on_checkpoint;

  void validate() const;
};

/// Sample-weighted averages over the mini-batches of one epoch, measured on
/// the train-mode forward passes used for the updates.
struct EpochRecord {
  std::size_t epoch = 0;
  double total_loss = 0.0;
  double selective_loss = 0.0;
  double auxiliary_loss = 0.0;
  double soft_coverage = 0.0;
  double hard_coverage = 0.0;
  double selective_risk = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  bool operator==(const TrainHistory&) const = default;
};

/// Mini-batch index lists for one epoch. A trailing batch smaller than
/// `min_batch` is merged into the previous one.
std::vector<std::vector<std::size_t>> make_batches(
    std::vector<std::size_t> order, std::size_t batch_size,
    std::size_t min_batch);

/// Minimizes alpha * selective loss + (1 - alpha) * auxiliary loss (a plain
/// mean task loss for a baseline model without g). Deterministic given the
/// config seed. Records the target coverage on the model.
TrainHistory train(SelectiveNet& model, const Dataset& data,
                   const TrainConfig& config);

/// Cross-entropy for classification, squared loss for regression.
TaskLoss task_loss_for(const Task& task);

}  // namespace selnet
