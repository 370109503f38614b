#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "selnet/error.hpp"
#include "selnet/tensor.hpp"

namespace selnet {
namespace {

using detail::TapeNode;
using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;
using BackwardFn = std::function<void(const TensorImpl&)>;

Tensor make_result(std::string_view op, Shape shape, std::vector<double> value,
                   std::vector<ImplPtr> inputs, BackwardFn backward) {
#ifndef NDEBUG
  for (double v : value) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string(op) + " produced a non-finite value");
    }
  }
#endif
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(value);
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(),
                  [](const ImplPtr& in) { return in->requires_grad; });
  if (needs_grad) {
    impl->requires_grad = true;
    impl->node = std::make_shared<TapeNode>(
        TapeNode{op, std::move(inputs), std::move(backward)});
  }
  return Tensor(std::move(impl));
}

const ImplPtr& impl_of(const Tensor& t) {
  if (!t.defined()) throw ContractError("use of an undefined tensor");
  return t.impl();
}

struct Broadcast {
  Shape shape;
  bool a_scalar = false;
  bool b_scalar = false;
};

Broadcast broadcast(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() == b.shape()) return {a.shape(), false, false};
  if (a.size() == 1) return {b.shape(), true, false};
  if (b.size() == 1) return {a.shape(), false, true};
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

// f(a, b) -> value; da/db(a, b, out) -> partial derivatives.
template <typename F, typename DA, typename DB>
Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, F f,
              DA da, DB db) {
  const ImplPtr& ia = impl_of(a);
  const ImplPtr& ib = impl_of(b);
  Broadcast bc = broadcast(a, b, op);
  const std::size_t n = element_count(bc.shape);
  std::vector<double> out(n);
  const auto& av = ia->value;
  const auto& bv = ib->value;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(av[bc.a_scalar ? 0 : i], bv[bc.b_scalar ? 0 : i]);
  }
  TensorImpl* pa = ia.get();
  TensorImpl* pb = ib.get();
  const bool as = bc.a_scalar;
  const bool bs = bc.b_scalar;
  return make_result(
      op, std::move(bc.shape), std::move(out), {ia, ib},
      [pa, pb, as, bs, da, db](const TensorImpl& o) {
        const std::size_t count = o.value.size();
        if (pa->requires_grad) {
          auto& g = pa->grad_buffer();
          for (std::size_t i = 0; i < count; ++i) {
            const double x = pa->value[as ? 0 : i];
            const double y = pb->value[bs ? 0 : i];
            g[as ? 0 : i] += o.grad[i] * da(x, y, o.value[i]);
          }
        }
        if (pb->requires_grad) {
          auto& g = pb->grad_buffer();
          for (std::size_t i = 0; i < count; ++i) {
            const double x = pa->value[as ? 0 : i];
            const double y = pb->value[bs ? 0 : i];
            g[bs ? 0 : i] += o.grad[i] * db(x, y, o.value[i]);
          }
        }
      });
}

// f(x) -> value; df(x, out) -> derivative.
template <typename F, typename DF>
Tensor unary(std::string_view op, const Tensor& x, F f, DF df) {
  const ImplPtr& ix = impl_of(x);
  std::vector<double> out(ix->value.size());
  std::transform(ix->value.begin(), ix->value.end(), out.begin(), f);
  TensorImpl* px = ix.get();
  return make_result(op, ix->shape, std::move(out), {ix},
                     [px, df](const TensorImpl& o) {
                       auto& g = px->grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] += o.grad[i] * df(px->value[i], o.value[i]);
                       }
                     });
}

struct AxisLayout {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
  Shape reduced;
};

AxisLayout axis_layout(const Tensor& x, std::size_t axis,
                       std::string_view op) {
  const Shape& s = x.shape();
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_string(s));
  }
  AxisLayout layout;
  for (std::size_t i = 0; i < axis; ++i) layout.outer *= s[i];
  layout.length = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) layout.inner *= s[i];
  layout.reduced = s;
  layout.reduced.erase(layout.reduced.begin() +
                       static_cast<std::ptrdiff_t>(axis));
  if (layout.length == 0 || x.size() == 0) {
    throw DomainError(std::string(op) + " over an empty axis of shape " +
                      shape_string(s));
  }
  return layout;
}

void require_nonempty(const Tensor& x, std::string_view op) {
  if (x.size() == 0) {
    throw DomainError(std::string(op) + " of an empty tensor");
  }
}

void require_rank(const Tensor& x, std::size_t rank, std::string_view op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + " expects rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_string(x.shape()));
  }
}

Tensor constant(double v) { return Tensor::scalar(v); }

}  // namespace

// -- Elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator+(const Tensor& a, double b) { return add(a, constant(b)); }
Tensor operator+(double a, const Tensor& b) { return add(constant(a), b); }
Tensor operator-(const Tensor& a, double b) { return sub(a, constant(b)); }
Tensor operator-(double a, const Tensor& b) { return sub(constant(a), b); }
Tensor operator*(const Tensor& a, double b) { return mul(a, constant(b)); }
Tensor operator*(double a, const Tensor& b) { return mul(constant(a), b); }
Tensor operator/(const Tensor& a, double b) { return div(a, constant(b)); }
Tensor operator-(const Tensor& a) {
  return unary(
      "neg", a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor max0(const Tensor& x) {
  return unary(
      "max0", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : impl_of(x)->value) {
    if (!(v > 0.0)) {
      throw DomainError("log of non-positive value " + std::to_string(v));
    }
  }
  return unary(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(
      "clamp_min", x, [lo](double v) { return v < lo ? lo : v; },
      [lo](double v, double) { return v < lo ? 0.0 : 1.0; });
}

// -- Reductions --------------------------------------------------------------

Tensor sum(const Tensor& x) {
  require_nonempty(x, "sum");
  const ImplPtr& ix = impl_of(x);
  double total = 0.0;
  for (double v : ix->value) total += v;
  TensorImpl* px = ix.get();
  return make_result("sum", Shape{}, {total}, {ix},
                     [px](const TensorImpl& o) {
                       auto& g = px->grad_buffer();
                       for (double& gi : g) gi += o.grad[0];
                     });
}

Tensor mean(const Tensor& x) {
  require_nonempty(x, "mean");
  const ImplPtr& ix = impl_of(x);
  double total = 0.0;
  for (double v : ix->value) total += v;
  const double count = static_cast<double>(ix->value.size());
  TensorImpl* px = ix.get();
  return make_result("mean", Shape{}, {total / count}, {ix},
                     [px, count](const TensorImpl& o) {
                       auto& g = px->grad_buffer();
                       const double share = o.grad[0] / count;
                       for (double& gi : g) gi += share;
                     });
}

Tensor max(const Tensor& x) {
  require_nonempty(x, "max");
  const ImplPtr& ix = impl_of(x);
  const auto it = std::max_element(ix->value.begin(), ix->value.end());
  const std::size_t arg = static_cast<std::size_t>(it - ix->value.begin());
  TensorImpl* px = ix.get();
  return make_result("max", Shape{}, {*it}, {ix},
                     [px, arg](const TensorImpl& o) {
                       px->grad_buffer()[arg] += o.grad[0];
                     });
}

namespace {

Tensor sum_or_mean_axis(const Tensor& x, std::size_t axis, bool average) {
  const char* op = average ? "mean_axis" : "sum_axis";
  AxisLayout l = axis_layout(x, axis, op);
  const ImplPtr& ix = impl_of(x);
  const double scale = average ? 1.0 / static_cast<double>(l.length) : 1.0;
  std::vector<double> out(l.outer * l.inner, 0.0);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t k = 0; k < l.length; ++k) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        out[o * l.inner + i] += ix->value[(o * l.length + k) * l.inner + i];
      }
    }
  }
  for (double& v : out) v *= scale;
  TensorImpl* px = ix.get();
  return make_result(op, l.reduced, std::move(out), {ix},
                     [px, l, scale](const TensorImpl& o) {
                       auto& g = px->grad_buffer();
                       for (std::size_t a = 0; a < l.outer; ++a) {
                         for (std::size_t k = 0; k < l.length; ++k) {
                           for (std::size_t i = 0; i < l.inner; ++i) {
                             g[(a * l.length + k) * l.inner + i] +=
                                 o.grad[a * l.inner + i] * scale;
                           }
                         }
                       }
                     });
}

}  // namespace

Tensor sum(const Tensor& x, std::size_t axis) {
  return sum_or_mean_axis(x, axis, false);
}

Tensor mean(const Tensor& x, std::size_t axis) {
  return sum_or_mean_axis(x, axis, true);
}

Tensor max(const Tensor& x, std::size_t axis) {
  AxisLayout l = axis_layout(x, axis, "max_axis");
  const ImplPtr& ix = impl_of(x);
  std::vector<double> out(l.outer * l.inner);
  std::vector<std::size_t> arg(l.outer * l.inner);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      std::size_t best = o * l.length * l.inner + i;
      for (std::size_t k = 1; k < l.length; ++k) {
        const std::size_t idx = (o * l.length + k) * l.inner + i;
        if (ix->value[idx] > ix->value[best]) best = idx;
      }
      out[o * l.inner + i] = ix->value[best];
      arg[o * l.inner + i] = best;
    }
  }
  TensorImpl* px = ix.get();
  return make_result("max_axis", l.reduced, std::move(out), {ix},
                     [px, arg = std::move(arg)](const TensorImpl& o) {
                       auto& g = px->grad_buffer();
                       for (std::size_t j = 0; j < arg.size(); ++j) {
                         g[arg[j]] += o.grad[j];
                       }
                     });
}

// -- Shape and matrix operations ---------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) +
                         " by " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  const ImplPtr& ia = impl_of(a);
  const ImplPtr& ib = impl_of(b);
  std::vector<double> out(m * n, 0.0);
  const double* av = ia->value.data();
  const double* bv = ib->value.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = bv + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  TensorImpl* pa = ia.get();
  TensorImpl* pb = ib.get();
  return make_result(
      "matmul", Shape{m, n}, std::move(out), {ia, ib},
      [pa, pb, m, k, n](const TensorImpl& o) {
        const double* g = o.grad.data();
        if (pa->requires_grad) {
          // dA = dC * B^T
          auto& ga = pa->grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = pb->value.data() + p * n;
              const double* grow = g + i * n;
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (pb->requires_grad) {
          // dB = A^T * dC
          auto& gb = pb->grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double s = pa->value[i * k + p];
              double* gbrow = gb.data() + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += s * grow[j];
            }
          }
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (element_count(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) +
                         " as " + shape_string(shape));
  }
  const ImplPtr& ix = impl_of(x);
  TensorImpl* px = ix.get();
  return make_result("reshape", std::move(shape), ix->value, {ix},
                     [px](const TensorImpl& o) {
                       auto& g = px->grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] += o.grad[i];
                       }
                     });
}

Tensor add_row_vector(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row_vector");
  if (bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_row_vector: bias " + shape_string(bias.shape()) +
                         " does not match rows of " + shape_string(x.shape()));
  }
  const std::size_t m = x.dim(0);
  const std::size_t n = x.dim(1);
  const ImplPtr& ix = impl_of(x);
  const ImplPtr& ib = impl_of(bias);
  std::vector<double> out(ix->value);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += ib->value[j];
  }
  TensorImpl* px = ix.get();
  TensorImpl* pb = ib.get();
  return make_result("add_row_vector", x.shape(), std::move(out), {ix, ib},
                     [px, pb, m, n](const TensorImpl& o) {
                       if (px->requires_grad) {
                         auto& g = px->grad_buffer();
                         for (std::size_t i = 0; i < m * n; ++i) {
                           g[i] += o.grad[i];
                         }
                       }
                       if (pb->requires_grad) {
                         auto& g = pb->grad_buffer();
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) {
                             g[j] += o.grad[i * n + j];
                           }
                         }
                       }
                     });
}

Tensor pick_columns(const Tensor& x, std::span<const std::size_t> index) {
  require_rank(x, 2, "pick_columns");
  const std::size_t m = x.dim(0);
  const std::size_t n = x.dim(1);
  if (index.size() != m) {
    throw DimensionError("pick_columns: " + std::to_string(index.size()) +
                         " indices for " + shape_string(x.shape()));
  }
  const ImplPtr& ix = impl_of(x);
  std::vector<std::size_t> cols(index.begin(), index.end());
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (cols[i] >= n) {
      throw DimensionError("pick_columns: column " + std::to_string(cols[i]) +
                           " out of range for " + shape_string(x.shape()));
    }
    out[i] = ix->value[i * n + cols[i]];
  }
  TensorImpl* px = ix.get();
  return make_result("pick_columns", Shape{m}, std::move(out), {ix},
                     [px, n, cols = std::move(cols)](const TensorImpl& o) {
                       auto& g = px->grad_buffer();
                       for (std::size_t i = 0; i < cols.size(); ++i) {
                         g[i * n + cols[i]] += o.grad[i];
                       }
                     });
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t m = logits.dim(0);
  const std::size_t n = logits.dim(1);
  const ImplPtr& ix = impl_of(logits);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = ix->value.data() + i * n;
    double* dst = out.data() + i * n;
    const double top = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(row[j] - top);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  TensorImpl* px = ix.get();
  return make_result("softmax", logits.shape(), std::move(out), {ix},
                     [px, m, n](const TensorImpl& o) {
                       auto& g = px->grad_buffer();
                       for (std::size_t i = 0; i < m; ++i) {
                         const double* y = o.value.data() + i * n;
                         const double* gy = o.grad.data() + i * n;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           dot += gy[j] * y[j];
                         }
                         for (std::size_t j = 0; j < n; ++j) {
                           g[i * n + j] += y[j] * (gy[j] - dot);
                         }
                       }
                     });
}

namespace {

void check_norm_params(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, std::string_view op) {
  require_rank(x, 2, op);
  const Shape expected{x.dim(1)};
  if (gamma.shape() != expected || beta.shape() != expected) {
    throw DimensionError(std::string(op) + ": parameters " +
                         shape_string(gamma.shape()) + "/" +
                         shape_string(beta.shape()) + " do not match " +
                         shape_string(x.shape()));
  }
}

// y = gamma * xhat + beta with dxhat handled by the caller.
void affine_param_grads(TensorImpl* pg, TensorImpl* pb,
                        const std::vector<double>& xhat, const TensorImpl& o,
                        std::size_t m, std::size_t n) {
  if (pg->requires_grad) {
    auto& g = pg->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        g[j] += o.grad[i * n + j] * xhat[i * n + j];
      }
    }
  }
  if (pb->requires_grad) {
    auto& g = pb->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
    }
  }
}

}  // namespace

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma,
                        const Tensor& beta, double eps,
                        std::vector<double>& batch_mean,
                        std::vector<double>& batch_var) {
  check_norm_params(x, gamma, beta, "batch_norm_train");
  const std::size_t m = x.dim(0);
  const std::size_t n = x.dim(1);
  if (m < 2) {
    throw ContractError("batch_norm_train needs at least 2 rows, got " +
                        std::to_string(m));
  }
  const ImplPtr& ix = impl_of(x);
  const ImplPtr& ig = impl_of(gamma);
  const ImplPtr& ib = impl_of(beta);
  const auto& xv = ix->value;
  batch_mean.assign(n, 0.0);
  batch_var.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) batch_mean[j] += xv[i * n + j];
  }
  for (double& v : batch_mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - batch_mean[j];
      batch_var[j] += d * d;
    }
  }
  for (double& v : batch_var) v /= static_cast<double>(m);

  std::vector<double> inv_std(n);
  for (std::size_t j = 0; j < n; ++j) {
    inv_std[j] = 1.0 / std::sqrt(batch_var[j] + eps);
  }
  std::vector<double> xhat(m * n);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t idx = i * n + j;
      xhat[idx] = (xv[idx] - batch_mean[j]) * inv_std[j];
      out[idx] = ig->value[j] * xhat[idx] + ib->value[j];
    }
  }
  TensorImpl* px = ix.get();
  TensorImpl* pg = ig.get();
  TensorImpl* pb = ib.get();
  return make_result(
      "batch_norm_train", x.shape(), std::move(out), {ix, ig, ib},
      [px, pg, pb, m, n, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](const TensorImpl& o) {
        affine_param_grads(pg, pb, xhat, o, m, n);
        if (!px->requires_grad) return;
        auto& g = px->grad_buffer();
        const double count = static_cast<double>(m);
        for (std::size_t j = 0; j < n; ++j) {
          double sum_d = 0.0;
          double sum_dx = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            const double d = o.grad[i * n + j] * pg->value[j];
            sum_d += d;
            sum_dx += d * xhat[i * n + j];
          }
          for (std::size_t i = 0; i < m; ++i) {
            const double d = o.grad[i * n + j] * pg->value[j];
            g[i * n + j] += inv_std[j] / count *
                            (count * d - sum_d - xhat[i * n + j] * sum_dx);
          }
        }
      });
}

Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, std::span<const double> mean,
                       std::span<const double> var, double eps) {
  check_norm_params(x, gamma, beta, "batch_norm_eval");
  const std::size_t m = x.dim(0);
  const std::size_t n = x.dim(1);
  if (mean.size() != n || var.size() != n) {
    throw DimensionError("batch_norm_eval: statistics of width " +
                         std::to_string(mean.size()) + " for " +
                         shape_string(x.shape()));
  }
  const ImplPtr& ix = impl_of(x);
  const ImplPtr& ig = impl_of(gamma);
  const ImplPtr& ib = impl_of(beta);
  std::vector<double> inv_std(n);
  for (std::size_t j = 0; j < n; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  std::vector<double> xhat(m * n);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t idx = i * n + j;
      xhat[idx] = (ix->value[idx] - mean[j]) * inv_std[j];
      out[idx] = ig->value[j] * xhat[idx] + ib->value[j];
    }
  }
  TensorImpl* px = ix.get();
  TensorImpl* pg = ig.get();
  TensorImpl* pb = ib.get();
  return make_result("batch_norm_eval", x.shape(), std::move(out),
                     {ix, ig, ib},
                     [px, pg, pb, m, n, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](const TensorImpl& o) {
                       affine_param_grads(pg, pb, xhat, o, m, n);
                       if (!px->requires_grad) return;
                       auto& g = px->grad_buffer();
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < n; ++j) {
                           g[i * n + j] +=
                               o.grad[i * n + j] * pg->value[j] * inv_std[j];
                         }
                       }
                     });
}

}  // namespace selnet
