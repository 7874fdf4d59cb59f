#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>

namespace radseek {

// Residual callback: params -> residual vector (model - observed).
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
// Optional analytic Jacobian: params -> m x n matrix d r_i / d p_j.
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LevMarOptions {
  int max_iters = 100;
  double tau = 1e-3;        // initial damping scale
  double ftol = 1e-12;      // relative cost decrease
  double gtol = 1e-12;      // gradient infinity norm
  double xtol = 1e-12;      // relative step size
  Eigen::VectorXd lower;    // per-parameter bounds; empty = unbounded
  Eigen::VectorXd upper;
};

struct LevMarResult {
  Eigen::VectorXd params;
  double cost = 0.0;  // 0.5 * sum of squared residuals
  double rmse = 0.0;
  int iters = 0;
  bool converged = false;
};

// Damped Gauss-Newton with multiplicative lambda control. Steps that leave
// the feasible box or fail to decrease the cost are rejected and the
// damping is raised. Deterministic for fixed inputs.
LevMarResult levenberg_marquardt(const ResidualFn& residual,
                                 const Eigen::VectorXd& initial,
                                 const LevMarOptions& opts = {},
                                 const JacobianFn& jacobian = nullptr);

// Forward-difference Jacobian used when no analytic one is supplied.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual,
                                 const Eigen::VectorXd& params,
                                 double rel_step = 1e-7);

}  // namespace radseek
