#include "selnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "selnet/error.hpp"

namespace selnet {

GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        std::span<Tensor> params, double h,
                                        double floor) {
  if (!(h > 0.0)) throw ContractError("finite difference step must be > 0");
  const double first = loss_fn().item();
  const double second = loss_fn().item();
  if (first != second) {
    throw OracleError("loss function is not deterministic: " +
                      std::to_string(first) + " vs " + std::to_string(second));
  }

  for (Tensor& p : params) p.zero_grad();
  Tensor loss = loss_fn();
  if (loss.requires_grad()) loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.empty() ? std::vector<double>(p.size(), 0.0)
                                    : std::vector<double>(g.begin(), g.end()));
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + h;
      const double up = loss_fn().item();
      values[i] = original - h;
      const double down = loss_fn().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi][i];
      const double scale = std::max({std::abs(a), std::abs(numeric), floor});
      const double err = std::abs(a - numeric) / scale;
      ++result.coordinates;
      if (err > result.max_relative_error || result.coordinates == 1) {
        result.max_relative_error = err;
        result.worst_parameter = pi;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  for (Tensor& p : params) p.zero_grad();
  return result;
}

}  // namespace selnet
