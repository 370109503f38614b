#include "selnet/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "selnet/error.hpp"

namespace selnet {
namespace {

constexpr std::uint64_t kShuffleStream = 7;
constexpr std::uint64_t kDropoutStream = 8;

bool uses_batch_norm(const ArchitectureConfig& config) {
  if (config.selection_head && config.selection_batch_norm) return true;
  for (const auto& layer : config.body) {
    if (layer.batch_norm) return true;
  }
  return false;
}

}  // namespace

TaskLoss task_loss_for(const Task& task) {
  return task.is_classification() ? TaskLoss::CrossEntropy : TaskLoss::Squared;
}

void TrainConfig::validate() const {
  selnet::validate(optimizer);
  loss.validate();
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

std::vector<std::vector<std::size_t>> make_batches(
    std::vector<std::size_t> order, std::size_t batch_size,
    std::size_t min_batch) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() < min_batch) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

TrainHistory train(SelectiveNet& model, const Dataset& data,
                   const TrainConfig& config) {
  config.validate();
  data.validate();
  if (data.task != model.task()) {
    throw ConfigError("dataset task " + to_string(data.task) +
                      " does not match model task " + to_string(model.task()));
  }
  if (config.loss.task_loss != task_loss_for(model.task())) {
    throw ConfigError("task loss does not match the model task");
  }
  if (data.width() != model.config().input_width) {
    throw DimensionError("dataset has " + std::to_string(data.width()) +
                         " features, model expects " +
                         std::to_string(model.config().input_width));
  }
  const std::size_t min_batch = uses_batch_norm(model.config()) ? 2 : 1;
  if (data.size() < min_batch) {
    throw ContractError("batch normalization needs at least 2 training samples");
  }

  Optimizer optimizer(config.optimizer, model.parameters());
  Rng shuffle_rng(config.seed, kShuffleStream);
  Rng dropout_rng(config.seed, kDropoutStream);
  const TaskLoss loss_kind = config.loss.task_loss;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(order);
    const auto batches = make_batches(order, config.batch_size, min_batch);

    EpochRecord record;
    record.epoch = epoch;
    double seen = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& index = batches[b];
      const Tensor x = data.features.select_rows(index).to_tensor();
      std::vector<double> y;
      y.reserve(index.size());
      for (std::size_t i : index) y.push_back(data.labels[i]);

      HeadOutputs out = model.forward(x, Mode::Train, &dropout_rng);
      const Tensor f_losses = task_loss(loss_kind, out.f, y);
      Tensor total;
      double selective = 0.0;
      double auxiliary = 0.0;
      double soft = 1.0;
      double hard = 1.0;
      double risk = 0.0;
      auto diverged = [&](double value) {
        return DivergenceError("training diverged at epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(b) + ": loss is " +
                               std::to_string(value));
      };
      if (model.has_selection_head()) {
        const double coverage = empirical_coverage(out.g.detach()).item();
        if (!std::isfinite(coverage)) throw diverged(coverage);
        Tensor sel = selective_loss(f_losses, out.g, config.loss);
        selective = sel.item();
        risk = empirical_selective_risk(f_losses.detach(), out.g.detach()).item();
        soft = empirical_coverage(out.g.detach()).item();
        std::size_t accepted = 0;
        for (double g : out.g.values()) accepted += g >= 0.5 ? 1 : 0;
        hard = static_cast<double>(accepted) / static_cast<double>(index.size());
        if (model.has_auxiliary_head()) {
          Tensor aux = auxiliary_loss(task_loss(loss_kind, out.h, y));
          auxiliary = aux.item();
          total = total_loss(sel, aux, config.loss.alpha);
        } else {
          total = sel;
        }
      } else {
        total = mean(f_losses);
        selective = total.item();
        risk = selective;
      }

      const double value = total.item();
      if (!std::isfinite(value)) throw diverged(value);
      optimizer.zero_grad();
      total.backward();
      optimizer.step(epoch);

      const double w = static_cast<double>(index.size());
      seen += w;
      record.total_loss += w * value;
      record.selective_loss += w * selective;
      record.auxiliary_loss += w * auxiliary;
      record.soft_coverage += w * soft;
      record.hard_coverage += w * hard;
      record.selective_risk += w * risk;
    }
    record.total_loss /= seen;
    record.selective_loss /= seen;
    record.auxiliary_loss /= seen;
    record.soft_coverage /= seen;
    record.hard_coverage /= seen;
    record.selective_risk /= seen;
    history.epochs.push_back(record);

    if (config.checkpoint_every > 0 && config.on_checkpoint &&
        (epoch + 1) % config.checkpoint_every == 0) {
      config.on_checkpoint(epoch, model);
    }
  }
  model.set_trained_coverage(model.has_selection_head()
                                 ? std::optional<double>(config.loss.coverage)
                                 : std::optional<double>(1.0));
  return history;
}

}  // namespace selnet
