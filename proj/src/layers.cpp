#include "selnet/layers.hpp"

#include <cmath>
#include <string>

#include "selnet/error.hpp"

namespace selnet {

DenseLayer::DenseLayer(std::size_t in_features, std::size_t out_features,
                       Init init, Rng& rng) {
  if (in_features == 0 || out_features == 0) {
    throw ConfigError("dense layer with zero width (" +
                      std::to_string(in_features) + " -> " +
                      std::to_string(out_features) + ")");
  }
  const double fan_in = static_cast<double>(in_features);
  const double fan_out = static_cast<double>(out_features);
  const double limit = init == Init::HeUniform
                           ? std::sqrt(6.0 / fan_in)
                           : std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> w(in_features * out_features);
  for (double& v : w) v = rng.uniform(-limit, limit);
  weight_ = Tensor::matrix(in_features, out_features, std::move(w), true);
  bias_ = Tensor::zeros({out_features}, true);
}

DenseLayer::DenseLayer(const DenseLayer& other)
    : weight_(other.weight_.clone()), bias_(other.bias_.clone()) {}

DenseLayer& DenseLayer::operator=(const DenseLayer& other) {
  if (this != &other) {
    weight_ = other.weight_.clone();
    bias_ = other.bias_.clone();
  }
  return *this;
}

Tensor DenseLayer::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_features()) {
    throw DimensionError("dense layer expects [batch x " +
                         std::to_string(in_features()) + "], got " +
                         shape_string(x.shape()));
  }
  return add_row_vector(matmul(x, weight_), bias_);
}

BatchNormLayer::BatchNormLayer(std::size_t features, double momentum,
                               double eps)
    : gamma_(Tensor::full({features}, 1.0, true)),
      beta_(Tensor::zeros({features}, true)),
      running_mean_(features, 0.0),
      running_var_(features, 1.0),
      momentum_(momentum),
      eps_(eps) {
  if (features == 0) throw ConfigError("batch norm with zero features");
  if (!(momentum > 0.0 && momentum < 1.0)) {
    throw ConfigError("batch norm momentum must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("batch norm epsilon must be positive");
}

BatchNormLayer::BatchNormLayer(const BatchNormLayer& other)
    : gamma_(other.gamma_.clone()),
      beta_(other.beta_.clone()),
      running_mean_(other.running_mean_),
      running_var_(other.running_var_),
      momentum_(other.momentum_),
      eps_(other.eps_) {}

BatchNormLayer& BatchNormLayer::operator=(const BatchNormLayer& other) {
  if (this != &other) *this = BatchNormLayer(other);
  return *this;
}

Tensor BatchNormLayer::forward(const Tensor& x, Mode mode) {
  if (mode != Mode::Train) {
    return batch_norm_eval(x, gamma_, beta_, running_mean_, running_var_,
                           eps_);
  }
  if (x.rank() == 2 && x.dim(0) < 2) {
    throw ContractError("batch norm in train mode needs a batch of >= 2, got " +
                        std::to_string(x.dim(0)));
  }
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
  Tensor y = batch_norm_train(x, gamma_, beta_, eps_, batch_mean, batch_var);
  const double m = static_cast<double>(x.dim(0));
  for (std::size_t j = 0; j < running_mean_.size(); ++j) {
    running_mean_[j] =
        momentum_ * running_mean_[j] + (1.0 - momentum_) * batch_mean[j];
    running_var_[j] = momentum_ * running_var_[j] +
                      (1.0 - momentum_) * batch_var[j] * m / (m - 1.0);
  }
  return y;
}

DropoutLayer::DropoutLayer(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " +
                      std::to_string(rate));
  }
}

Tensor DropoutLayer::forward(const Tensor& x, Mode mode, Rng* rng,
                             std::optional<double> rate_override) const {
  const double p = rate_override.value_or(rate_);
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " +
                      std::to_string(p));
  }
  if (mode == Mode::Eval || p == 0.0) return x;
  if (rng == nullptr) {
    throw ContractError("active dropout requires a random source");
  }
  const double scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (double& v : mask) v = rng->uniform() < p ? 0.0 : scale;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace selnet
