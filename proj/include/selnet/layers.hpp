#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "selnet/rng.hpp"
#include "selnet/tensor.hpp"

namespace selnet {

/// Forward-pass regime. ForcedActive keeps dropout sampling on while every
/// other layer behaves as in Eval (MC-dropout inference).
enum class Mode { Train, Eval, ForcedActive };

enum class Init { HeUniform, GlorotUniform };

class DenseLayer {
 public:
  DenseLayer(std::size_t in_features, std::size_t out_features, Init init,
             Rng& rng);
  // Copies own their parameters.
  DenseLayer(const DenseLayer& other);
  DenseLayer& operator=(const DenseLayer& other);
  DenseLayer(DenseLayer&&) = default;
  DenseLayer& operator=(DenseLayer&&) = default;

  /// x[batch x in] -> x W + b.
  Tensor forward(const Tensor& x) const;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  std::vector<Tensor> parameters() const { return {weight_, bias_}; }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Per-feature batch normalization. Running statistics follow
/// running = momentum * running + (1 - momentum) * batch, with the unbiased
/// batch variance.
class BatchNormLayer {
 public:
  explicit BatchNormLayer(std::size_t features, double momentum = 0.9,
                          double eps = 1e-5);
  BatchNormLayer(const BatchNormLayer& other);
  BatchNormLayer& operator=(const BatchNormLayer& other);
  BatchNormLayer(BatchNormLayer&&) = default;
  BatchNormLayer& operator=(BatchNormLayer&&) = default;

  /// Train mode needs at least two rows and updates the running statistics.
  Tensor forward(const Tensor& x, Mode mode);

  std::size_t features() const { return gamma_.size(); }
  double momentum() const { return momentum_; }
  double eps() const { return eps_; }
  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  const Tensor& gamma() const { return gamma_; }
  const Tensor& beta() const { return beta_; }
  std::vector<double>& running_mean() { return running_mean_; }
  std::vector<double>& running_var() { return running_var_; }
  const std::vector<double>& running_mean() const { return running_mean_; }
  const std::vector<double>& running_var() const { return running_var_; }
  std::vector<Tensor> parameters() const { return {gamma_, beta_}; }

 private:
  Tensor gamma_;
  Tensor beta_;
  std::vector<double> running_mean_;
  std::vector<double> running_var_;
  double momentum_;
  double eps_;
};

/// Inverted dropout: survivors are scaled by 1/(1-p) so Eval is identity.
class DropoutLayer {
 public:
  explicit DropoutLayer(double rate);

  /// `rate_override` replaces the configured rate (MC-dropout inference).
  /// Train and ForcedActive draw a mask from `rng`, which must be non-null
  /// whenever the effective rate is positive.
  Tensor forward(const Tensor& x, Mode mode, Rng* rng,
                 std::optional<double> rate_override = std::nullopt) const;

  double rate() const { return rate_; }

 private:
  double rate_;
};

}  // namespace selnet
