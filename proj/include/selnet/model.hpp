#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "selnet/layers.hpp"
#include "selnet/preprocessing.hpp"
#include "selnet/task.hpp"

namespace selnet {

enum class Activation { Linear, Relu };

struct BodyLayerConfig {
  std::size_t width = 0;
  Activation activation = Activation::Relu;
  bool batch_norm = true;
  // A dropout layer exists after the activation iff this is set, even at
  // rate 0, so MC-dropout can force it active with another rate.
  std::optional<double> dropout;

  bool operator==(const BodyLayerConfig&) const = default;
};

struct ArchitectureConfig {
  std::size_t input_width = 0;
  std::vector<BodyLayerConfig> body;
  Task task;
  std::size_t selection_hidden = 16;
  bool selection_batch_norm = true;
  bool selection_head = true;
  bool auxiliary_head = true;

  /// Throws ConfigError on zero widths or an invalid task.
  void validate() const;
  /// Width of the representation layer feeding the heads.
  std::size_t representation_width() const;

  /// Fully connected regression network: one 64-unit ReLU body layer with
  /// batch norm, linear f and h heads, a 16-unit selection hidden layer.
  static ArchitectureConfig regression_default(std::size_t input_width);

  bool operator==(const ArchitectureConfig&) const = default;
};

/// Outputs of one forward pass. `f` and `h` are [batch] for regression and
/// [batch x k] probabilities for classification; `g` is [batch] in [0, 1].
/// Disabled heads yield undefined tensors.
struct HeadOutputs {
  Tensor f;
  Tensor g;
  Tensor h;
};

/// Shared body with prediction (f), selection (g) and auxiliary (h) heads.
/// A model built with `baseline` carries the body and f only.
class SelectiveNet {
 public:
  static SelectiveNet build(const ArchitectureConfig& config,
                            std::uint64_t seed);
  /// Same body and f initialization as `build` with the same seed.
  static SelectiveNet baseline(const ArchitectureConfig& config,
                               std::uint64_t seed);

  /// `rng` drives dropout masks in Train/ForcedActive; `dropout_rate`
  /// overrides every dropout layer's rate.
  HeadOutputs forward(const Tensor& x, Mode mode, Rng* rng = nullptr,
                      std::optional<double> dropout_rate = std::nullopt);

  /// Eval-mode selective prediction: entry i holds f(x_i) (class index for
  /// classification) when g(x_i) >= threshold and is empty otherwise.
  std::vector<std::optional<double>> predict(const Tensor& x,
                                             double threshold = 0.5);

  std::vector<Tensor> parameters() const;
  std::vector<Tensor> body_parameters() const;
  std::vector<Tensor> prediction_head_parameters() const;
  std::vector<Tensor> selection_head_parameters() const;
  std::vector<Tensor> auxiliary_head_parameters() const;
  std::size_t parameter_count() const;

  /// Every stored number in declaration order: parameters, then batch-norm
  /// running statistics.
  std::vector<std::span<double>> state();

  /// Removes h (inference artifacts do not need it).
  void drop_auxiliary_head();

  const ArchitectureConfig& config() const { return config_; }
  const Task& task() const { return config_.task; }
  bool has_selection_head() const { return g_hidden_.has_value(); }
  bool has_auxiliary_head() const { return h_.has_value(); }
  bool has_dropout() const;

  std::optional<double> trained_coverage() const { return trained_coverage_; }
  void set_trained_coverage(std::optional<double> c) { trained_coverage_ = c; }
  const std::optional<Normalization>& normalization() const {
    return normalization_;
  }
  void set_normalization(std::optional<Normalization> n) {
    normalization_ = std::move(n);
  }

 private:
  struct BodyBlock {
    DenseLayer dense;
    std::optional<BatchNormLayer> norm;
    Activation activation;
    std::optional<DropoutLayer> dropout;
  };

  SelectiveNet(const ArchitectureConfig& config, std::uint64_t seed,
               bool with_selection, bool with_auxiliary);

  Tensor task_head(const DenseLayer& head, const Tensor& rep) const;

  ArchitectureConfig config_;
  std::vector<BodyBlock> body_;
  std::optional<DenseLayer> f_;
  std::optional<DenseLayer> g_hidden_;
  std::optional<BatchNormLayer> g_norm_;
  std::optional<DenseLayer> g_out_;
  std::optional<DenseLayer> h_;
  std::optional<double> trained_coverage_;
  std::optional<Normalization> normalization_;
};

}  // namespace selnet
