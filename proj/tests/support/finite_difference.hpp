#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace mgmn::testing {

inline constexpr double kStep = 1e-5;

/// Central differences of f with respect to every entry of x. x is restored.
inline Eigen::MatrixXd numeric_gradient(const std::function<double()>& f, Eigen::MatrixXd& x,
                                        double h = kStep) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x(i);
    x(i) = saved + h;
    const double up = f();
    x(i) = saved - h;
    const double down = f();
    x(i) = saved;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// Largest entrywise |a - n| / max(|a|, |n|, floor). The floor keeps
/// entries that are zero up to rounding from dominating the ratio.
inline double max_relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic(i);
    const double n = numeric(i);
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

}  // namespace mgmn::testing
