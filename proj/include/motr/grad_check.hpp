#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/tensor.hpp"

namespace motr {

struct GradCheckReport {
  // Per checked element, in input order then flat index order.
  std::vector<double> rel_errors;
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradient entries
// from turning round-off into huge relative errors.
inline double relative_error(double analytic, double numeric,
                             double floor = 1e-3) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Compares tape gradients of the scalar `f()` with respect to every input
// leaf against central differences. `f` must rebuild its graph on each call.
template <class T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& f,
                           std::vector<Tensor<T>> inputs, double eps = 1e-5,
                           double tol = 1e-4) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3], got " +
                                std::to_string(eps));
  for (auto& x : inputs) {
    if (!x.requires_grad() || !x.is_leaf())
      throw std::invalid_argument("grad_check: inputs must be leaves with requires_grad");
    x.zero_grad();
  }
  auto loss = f();
  backward(loss);

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& x = inputs[k];
    std::vector<T> analytic(x.grad().begin(), x.grad().end());
    if (analytic.empty()) analytic.assign(x.numel(), T(0));
    auto data = x.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const T saved = data[i];
      data[i] = saved + T(eps);
      const double up = static_cast<double>(f().item());
      data[i] = saved - T(eps);
      const double down = static_cast<double>(f().item());
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[i], numeric);
      report.rel_errors.push_back(err);
      if (err > report.max_rel_error || report.rel_errors.size() == 1) {
        report.max_rel_error = err;
        report.worst_input = k;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

template <class T>
GradCheckReport grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                           Tensor<T> x, double eps = 1e-5, double tol = 1e-4) {
  return grad_check<T>([&f, x]() { return f(x); }, {x}, eps, tol);
}

}  // namespace motr
