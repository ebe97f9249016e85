#pragma once

#include <algorithm>
#include <functional>
#include <string>

#include "ggen/common.hpp"
#include "ggen/nn.hpp"

namespace ggen {

// Central finite difference of a scalar function with respect to every
// entry of `target`. The matrix is restored after probing.
template <typename LossFn>
Mat numeric_gradient(LossFn loss, Mat& target, double h = 1e-5) {
  Mat g(target.rows(), target.cols());
  for (Eigen::Index r = 0; r < target.rows(); ++r)
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      const double saved = target(r, c);
      target(r, c) = saved + h;
      const double up = loss();
      target(r, c) = saved - h;
      const double down = loss();
      target(r, c) = saved;
      g(r, c) = (up - down) / (2 * h);
    }
  return g;
}

inline double max_relative_error(const Mat& analytic, const Mat& numeric, double floor = 1e-4) {
  double worst = 0;
  for (Eigen::Index r = 0; r < analytic.rows(); ++r)
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const double a = analytic(r, c), n = numeric(r, c);
      const double denom = std::max({floor, std::abs(a), std::abs(n)});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  return worst;
}

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_tensor;
  std::size_t entries_checked = 0;
};

// Finite-difference check of every analytic parameter gradient. `loss` is
// re-evaluated with individual entries of `params` perturbed; `params` is
// restored on return.
inline GradCheckReport check_parameter_gradients(const std::function<double()>& loss,
                                                 ParamStore& params, const ParamStore& analytic,
                                                 double h = 1e-5, double floor = 1e-4) {
  GradCheckReport report;
  for (auto& [name, tensor] : params.tensors) {
    const Mat& a = analytic.at(name);
    const Mat n = numeric_gradient(loss, tensor, h);
    const double err = max_relative_error(a, n, floor);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_tensor = name;
    }
    report.entries_checked += static_cast<std::size_t>(tensor.size());
  }
  return report;
}

}  // namespace ggen
