#include "radseek/levmar.hpp"

#include <cmath>

namespace radseek {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual,
                                 const Eigen::VectorXd& params,
                                 double rel_step) {
  const Eigen::VectorXd r0 = residual(params);
  Eigen::MatrixXd jac(r0.size(), params.size());
  for (int j = 0; j < params.size(); ++j) {
    double h = rel_step * std::abs(params[j]);
    if (h < rel_step) h = rel_step;
    Eigen::VectorXd p = params;
    p[j] += h;
    jac.col(j) = (residual(p) - r0) / h;
  }
  return jac;
}

namespace {

bool in_bounds(const Eigen::VectorXd& p, const LevMarOptions& opts) {
  if (opts.lower.size() == p.size()) {
    for (int i = 0; i < p.size(); ++i) {
      if (p[i] < opts.lower[i]) return false;
    }
  }
  if (opts.upper.size() == p.size()) {
    for (int i = 0; i < p.size(); ++i) {
      if (p[i] > opts.upper[i]) return false;
    }
  }
  return true;
}

}  // namespace

LevMarResult levenberg_marquardt(const ResidualFn& residual,
                                 const Eigen::VectorXd& initial,
                                 const LevMarOptions& opts,
                                 const JacobianFn& jacobian) {
  Eigen::VectorXd p = initial;
  Eigen::VectorXd r = residual(p);
  double cost = 0.5 * r.squaredNorm();

  Eigen::MatrixXd jac =
      jacobian ? jacobian(p) : numeric_jacobian(residual, p);
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::VectorXd g = jac.transpose() * r;

  double lambda = opts.tau * jtj.diagonal().maxCoeff();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) lambda = opts.tau;
  double nu = 2.0;

  LevMarResult result;
  result.params = p;
  result.cost = cost;

  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < opts.gtol) {
      result.converged = true;
      break;
    }
    Eigen::MatrixXd a = jtj;
    a.diagonal().array() += lambda;
    const Eigen::VectorXd step = a.ldlt().solve(-g);
    if (!step.allFinite()) {
      lambda *= nu;
      nu *= 2.0;
      continue;
    }
    if (step.norm() < opts.xtol * (p.norm() + opts.xtol)) {
      result.converged = true;
      break;
    }
    const Eigen::VectorXd p_new = p + step;
    bool accept = in_bounds(p_new, opts);
    Eigen::VectorXd r_new;
    double cost_new = std::numeric_limits<double>::infinity();
    if (accept) {
      r_new = residual(p_new);
      cost_new = 0.5 * r_new.squaredNorm();
      accept = std::isfinite(cost_new) && cost_new < cost;
    }
    if (accept) {
      const double decrease = (cost - cost_new) / std::max(cost, 1e-300);
      p = p_new;
      r = std::move(r_new);
      cost = cost_new;
      jac = jacobian ? jacobian(p) : numeric_jacobian(residual, p);
      jtj = jac.transpose() * jac;
      g = jac.transpose() * r;
      lambda = std::max(lambda / 3.0, 1e-14);
      nu = 2.0;
      if (decrease < opts.ftol) {
        result.converged = true;
        ++iter;
        break;
      }
    } else {
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e14) break;  // stuck
    }
  }

  result.params = p;
  result.cost = cost;
  result.rmse = r.size() > 0 ? std::sqrt(r.squaredNorm() / r.size()) : 0.0;
  result.iters = iter;
  if (!result.converged && g.lpNorm<Eigen::Infinity>() < 1e-8) {
    result.converged = true;
  }
  return result;
}

}  // namespace radseek
