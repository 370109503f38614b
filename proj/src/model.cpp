#include "selnet/model.hpp"

#include <string>

#include "selnet/error.hpp"

namespace selnet {
namespace {

// Independent initialization streams so a baseline shares body and f
// initialization with the full model.
constexpr std::uint64_t kBodyStream = 1;
constexpr std::uint64_t kPredictionStream = 2;
constexpr std::uint64_t kSelectionStream = 3;
constexpr std::uint64_t kAuxiliaryStream = 4;

void append(std::vector<Tensor>& out, const std::vector<Tensor>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

void ArchitectureConfig::validate() const {
  if (input_width == 0) throw ConfigError("input width must be positive");
  if (body.empty()) throw ConfigError("main body needs at least one layer");
  for (const auto& layer : body) {
    if (layer.width == 0) throw ConfigError("zero-width body layer");
    if (layer.dropout && !(*layer.dropout >= 0.0 && *layer.dropout < 1.0)) {
      throw ConfigError("dropout rate must lie in [0, 1)");
    }
  }
  if (selection_head && selection_hidden == 0) {
    throw ConfigError("zero-width selection hidden layer");
  }
  if (task.is_classification() && task.num_classes < 2) {
    throw ConfigError("classification needs at least 2 classes");
  }
}

std::size_t ArchitectureConfig::representation_width() const {
  return body.empty() ? input_width : body.back().width;
}

ArchitectureConfig ArchitectureConfig::regression_default(
    std::size_t input_width) {
  ArchitectureConfig config;
  config.input_width = input_width;
  config.body = {BodyLayerConfig{64, Activation::Relu, true, std::nullopt}};
  config.task = Task::regression();
  config.selection_hidden = 16;
  return config;
}

SelectiveNet SelectiveNet::build(const ArchitectureConfig& config,
                                 std::uint64_t seed) {
  return SelectiveNet(config, seed, config.selection_head,
                      config.auxiliary_head);
}

SelectiveNet SelectiveNet::baseline(const ArchitectureConfig& config,
                                    std::uint64_t seed) {
  ArchitectureConfig plain = config;
  plain.selection_head = false;
  plain.auxiliary_head = false;
  return SelectiveNet(plain, seed, false, false);
}

SelectiveNet::SelectiveNet(const ArchitectureConfig& config,
                           std::uint64_t seed, bool with_selection,
                           bool with_auxiliary)
    : config_(config) {
  config_.validate();
  config_.selection_head = with_selection;
  config_.auxiliary_head = with_auxiliary;

  Rng body_rng(seed, kBodyStream);
  std::size_t width = config_.input_width;
  for (const auto& spec : config_.body) {
    // He only when the ReLU consumes the dense output directly; batch norm
    // in between removes the scale He corrects for.
    const Init init = spec.activation == Activation::Relu && !spec.batch_norm
                          ? Init::HeUniform
                          : Init::GlorotUniform;
    BodyBlock block{DenseLayer(width, spec.width, init, body_rng),
                    std::nullopt, spec.activation, std::nullopt};
    if (spec.batch_norm) block.norm.emplace(spec.width);
    if (spec.dropout) block.dropout.emplace(*spec.dropout);
    body_.push_back(std::move(block));
    width = spec.width;
  }

  const std::size_t out = config_.task.output_width();
  Rng f_rng(seed, kPredictionStream);
  f_.emplace(width, out, Init::GlorotUniform, f_rng);
  if (with_selection) {
    Rng g_rng(seed, kSelectionStream);
    g_hidden_.emplace(width, config_.selection_hidden,
                      config_.selection_batch_norm ? Init::GlorotUniform
                                                   : Init::HeUniform,
                      g_rng);
    if (config_.selection_batch_norm) g_norm_.emplace(config_.selection_hidden);
    g_out_.emplace(config_.selection_hidden, 1, Init::GlorotUniform, g_rng);
  }
  if (with_auxiliary) {
    Rng h_rng(seed, kAuxiliaryStream);
    h_.emplace(width, out, Init::GlorotUniform, h_rng);
  }
}

Tensor SelectiveNet::task_head(const DenseLayer& head,
                               const Tensor& rep) const {
  Tensor z = head.forward(rep);
  if (config_.task.is_classification()) return softmax(z);
  return reshape(z, {z.dim(0)});
}

HeadOutputs SelectiveNet::forward(const Tensor& x, Mode mode, Rng* rng,
                                  std::optional<double> dropout_rate) {
  if (x.rank() != 2 || x.dim(1) != config_.input_width) {
    throw DimensionError("model expects [batch x " +
                         std::to_string(config_.input_width) + "], got " +
                         shape_string(x.shape()));
  }
  Tensor rep = x;
  for (auto& block : body_) {
    rep = block.dense.forward(rep);
    if (block.norm) rep = block.norm->forward(rep, mode);
    if (block.activation == Activation::Relu) rep = relu(rep);
    if (block.dropout) rep = block.dropout->forward(rep, mode, rng, dropout_rate);
  }

  HeadOutputs out;
  out.f = task_head(*f_, rep);
  if (g_hidden_) {
    Tensor hidden = g_hidden_->forward(rep);
    if (g_norm_) hidden = g_norm_->forward(hidden, mode);
    hidden = relu(hidden);
    Tensor logit = g_out_->forward(hidden);
    out.g = sigmoid(reshape(logit, {logit.dim(0)}));
  }
  if (h_) out.h = task_head(*h_, rep);
  return out;
}

std::vector<std::optional<double>> SelectiveNet::predict(const Tensor& x,
                                                         double threshold) {
  HeadOutputs out = forward(x, Mode::Eval);
  const std::size_t n = x.dim(0);
  std::vector<std::optional<double>> decisions(n);
  const std::size_t k = config_.task.output_width();
  for (std::size_t i = 0; i < n; ++i) {
    if (out.g.defined() && !(out.g.at(i) >= threshold)) continue;
    if (config_.task.is_classification()) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (out.f.at(i, j) > out.f.at(i, best)) best = j;
      }
      decisions[i] = static_cast<double>(best);
    } else {
      decisions[i] = out.f.at(i);
    }
  }
  return decisions;
}

std::vector<Tensor> SelectiveNet::body_parameters() const {
  std::vector<Tensor> params;
  for (const auto& block : body_) {
    append(params, block.dense.parameters());
    if (block.norm) append(params, block.norm->parameters());
  }
  return params;
}

std::vector<Tensor> SelectiveNet::prediction_head_parameters() const {
  return f_->parameters();
}

std::vector<Tensor> SelectiveNet::selection_head_parameters() const {
  std::vector<Tensor> params;
  if (!g_hidden_) return params;
  append(params, g_hidden_->parameters());
  if (g_norm_) append(params, g_norm_->parameters());
  append(params, g_out_->parameters());
  return params;
}

std::vector<Tensor> SelectiveNet::auxiliary_head_parameters() const {
  return h_ ? h_->parameters() : std::vector<Tensor>{};
}

std::vector<Tensor> SelectiveNet::parameters() const {
  std::vector<Tensor> params = body_parameters();
  append(params, prediction_head_parameters());
  append(params, selection_head_parameters());
  append(params, auxiliary_head_parameters());
  return params;
}

std::size_t SelectiveNet::parameter_count() const {
  std::size_t count = 0;
  for (const Tensor& p : parameters()) count += p.size();
  return count;
}

std::vector<std::span<double>> SelectiveNet::state() {
  std::vector<std::span<double>> spans;
  for (Tensor p : parameters()) spans.push_back(p.mutable_values());
  for (auto& block : body_) {
    if (block.norm) {
      spans.emplace_back(block.norm->running_mean());
      spans.emplace_back(block.norm->running_var());
    }
  }
  if (g_norm_) {
    spans.emplace_back(g_norm_->running_mean());
    spans.emplace_back(g_norm_->running_var());
  }
  return spans;
}

void SelectiveNet::drop_auxiliary_head() {
  h_.reset();
  config_.auxiliary_head = false;
}

bool SelectiveNet::has_dropout() const {
  for (const auto& block : body_) {
    if (block.dropout) return true;
  }
  return false;
}

}  // namespace selnet
