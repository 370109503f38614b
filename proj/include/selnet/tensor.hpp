#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selnet {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl;

/// One recorded operation. `backward` reads the output gradient and
/// accumulates into the gradients of `inputs`.
struct TapeNode {
  std::string_view op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  // Set on interior nodes once backward has consumed their tape.
  bool released = false;
  std::shared_ptr<TapeNode> node;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major array of doubles with reverse-mode differentiation.
///
/// A Tensor is a shared handle: copies alias the same storage. Operations
/// whose inputs require gradients record a node on the tape; `backward()` on
/// a scalar result walks that tape once in reverse topological order and
/// then releases it. Calling `backward()` again on the same graph throws.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  /// Rank-0 tensor.
  static Tensor scalar(double value, bool requires_grad = false);
  /// Rank-1 tensor copied from `values`.
  static Tensor vector(std::span<const double> values,
                       bool requires_grad = false);
  /// Rank-2 tensor from a row-major buffer.
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> values() const;
  /// Writable view of the storage. Intended for optimizer updates and
  /// finite-difference perturbation of leaves.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool is_leaf() const;
  /// Empty span until a backward pass has reached this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  /// Accumulates d(this)/d(leaf) into every reachable leaf that requires
  /// gradients. Requires a single-element tensor.
  void backward() const;

  /// Same values, no tape, no gradient requirement.
  Tensor detach() const;
  /// Deep copy of the values (and gradient flag) without tape history.
  Tensor clone() const;

  std::string_view op_name() const;

  /// Internal constructor used by operations.
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  detail::TensorImpl& checked() const;
  std::shared_ptr<detail::TensorImpl> impl_;
};

// -- Elementwise -------------------------------------------------------------
// Binary operations accept equal shapes or a single-element operand, which is
// broadcast against the other.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);
Tensor operator-(const Tensor& a);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
/// Throws DomainError on any non-positive element.
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
/// max(0, x); same values as relu, kept separate for penalty terms.
Tensor max0(const Tensor& x);
/// max(lo, x) with zero gradient where the clamp is active.
Tensor clamp_min(const Tensor& x, double lo);

// -- Reductions --------------------------------------------------------------
// Reducing an empty tensor throws DomainError. With an axis, that axis is
// removed from the result shape.

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis);
/// Gradient flows to the first maximal element.
Tensor max(const Tensor& x);
Tensor max(const Tensor& x, std::size_t axis);

// -- Shape and matrix operations ---------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, Shape shape);
/// x[m x n] + bias[n] added to every row.
Tensor add_row_vector(const Tensor& x, const Tensor& bias);
/// out[i] = x[i, index[i]] for a rank-2 x.
Tensor pick_columns(const Tensor& x, std::span<const std::size_t> index);
/// Row-wise softmax of a rank-2 tensor, max-subtracted.
Tensor softmax(const Tensor& logits);

/// Column-wise batch normalization over the rows of x using batch
/// statistics. `batch_mean` and `batch_var` (biased) receive the statistics.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma,
                        const Tensor& beta, double eps,
                        std::vector<double>& batch_mean,
                        std::vector<double>& batch_var);
/// Column-wise normalization with fixed statistics.
Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, std::span<const double> mean,
                       std::span<const double> var, double eps);

}  // namespace selnet
