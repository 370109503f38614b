#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "selnet/tensor.hpp"

namespace selnet {

struct GradCheckResult {
  double max_relative_error = 0.0;
  // Location and values of the worst coordinate.
  std::size_t worst_parameter = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of `loss_fn` with respect to `params`
/// against central differences (f(t+h) - f(t-h)) / 2h, one coordinate at a
/// time. The relative error of a coordinate is |a - n| / max(|a|, |n|, floor).
///
/// `loss_fn` must rebuild its graph on every call and be deterministic; two
/// calls that disagree raise OracleError. Gradients already stored in
/// `params` are cleared.
GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        std::span<Tensor> params,
                                        double h = 1e-5, double floor = 1e-8);

}  // namespace selnet
