#include "selnet/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "selnet/error.hpp"

namespace selnet {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

std::vector<double>& TensorImpl::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (element_count(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_string(shape) +
                         " cannot hold " + std::to_string(values.size()) +
                         " values");
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->value = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value),
                requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::span<const double> values, bool requires_grad) {
  return Tensor(Shape{values.size()},
                std::vector<double>(values.begin(), values.end()),
                requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

detail::TensorImpl& Tensor::checked() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }
std::size_t Tensor::size() const { return checked().value.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

std::span<const double> Tensor::values() const { return checked().value; }
std::span<double> Tensor::mutable_values() { return checked().value; }

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " +
                        shape_string(shape()));
  }
  return impl_->value[0];
}

double Tensor::at(std::size_t flat) const { return checked().value.at(flat); }

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& s = shape();
  if (s.size() != 2 || row >= s[0] || col >= s[1]) {
    throw DimensionError("index (" + std::to_string(row) + "," +
                         std::to_string(col) + ") invalid for shape " +
                         shape_string(s));
  }
  return impl_->value[row * s[1] + col];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }
bool Tensor::is_leaf() const { return checked().node == nullptr; }
std::span<const double> Tensor::grad() const { return checked().grad; }
void Tensor::zero_grad() { checked().grad.clear(); }

std::string_view Tensor::op_name() const {
  const auto& impl = checked();
  return impl.node ? impl.node->op : std::string_view{"leaf"};
}

Tensor Tensor::detach() const {
  return Tensor(shape(), impl_->value, false);
}

Tensor Tensor::clone() const {
  return Tensor(shape(), impl_->value, impl_->requires_grad);
}

void Tensor::backward() const {
  auto& root = checked();
  if (root.value.size() != 1) {
    throw ContractError("backward() requires a scalar root, got shape " +
                        shape_string(root.shape));
  }
  if (root.released) {
    throw ContractError(
        "backward() on a graph whose tape was already consumed; re-run the "
        "forward pass");
  }
  if (!root.requires_grad) {
    throw ContractError("backward() on a tensor that does not require grad");
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<const detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(&root, 0);
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    if (impl->node && next < impl->node->inputs.size()) {
      detail::TensorImpl* child = impl->node->inputs[next++].get();
      if (!child->requires_grad || visited.contains(child)) continue;
      if (child->released) {
        throw ContractError(
            "graph reuses an intermediate whose tape was already consumed");
      }
      visited.insert(child);
      stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(impl);
    stack.pop_back();
  }

  root.grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* impl = *it;
    if (impl->node && impl->node->backward) impl->node->backward(*impl);
  }
  for (detail::TensorImpl* impl : order) {
    if (impl->node) {
      impl->node.reset();
      impl->released = true;
    }
  }
}

}  // namespace selnet
