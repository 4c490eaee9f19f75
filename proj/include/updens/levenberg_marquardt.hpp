#pragma once

#include "types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace updens {

struct LMConfig
{
  double initial_damping = 1e-3;
  double damping_decrease = 10.0;
  double damping_increase = 10.0;
  double max_damping = 1e12;
  int max_iterations = 200;
  double relative_tolerance = 1e-9;
  //! Absolute objective below which a fit counts as exact.
  double objective_floor = 1e-30;
  //! Projection bound applied after each step; infinity disables it.
  double box = std::numeric_limits<double>::infinity();
};

struct LMResult
{
  Eigen::VectorXd params;
  double objective = 0.0;
  int iterations = 0;
  //! Objective after every accepted step, starting with the initial value.
  std::vector<double> accepted;
};

/**
 * Levenberg-Marquardt minimization of ||r(p)||^2.
 *
 * `problem` must provide
 *   Eigen::Index residual_count() const;
 *   void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r);
 *   void jacobian(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J);
 *
 * Each iteration solves (J^T J + lambda I) step = -J^T r, or the equivalent
 * system in residual space when there are more parameters than residuals.
 */
template <typename Problem>
LMResult levenberg_marquardt(Problem& problem, Eigen::VectorXd start, const LMConfig& cfg)
{
  const Eigen::Index m = problem.residual_count();
  const Eigen::Index p = start.size();
  auto project = [&](Eigen::VectorXd& v) {
    if (std::isfinite(cfg.box)) v = v.cwiseMax(-cfg.box).cwiseMin(cfg.box);
  };
  project(start);

  LMResult res;
  res.params = std::move(start);
  Eigen::VectorXd r(m);
  Eigen::MatrixXd jac(m, p);
  Eigen::VectorXd trial_r(m);
  Eigen::VectorXd step(p);
  Eigen::VectorXd trial(p);

  problem.jacobian(res.params, r, jac);
  res.objective = r.squaredNorm();
  res.accepted.push_back(res.objective);
  double lambda = cfg.initial_damping;
  const bool primal = p <= m;
  Eigen::MatrixXd normal;
  Eigen::MatrixXd sys;
  Eigen::LLT<Eigen::MatrixXd> llt;

  while (res.iterations < cfg.max_iterations && res.objective > cfg.objective_floor) {
    ++res.iterations;
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() == 0.0) break;
    // only the lower triangle is formed; LLT reads nothing else
    const Eigen::Index k = primal ? p : m;
    normal.setZero(k, k);
    if (primal) {
      normal.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
    } else {
      normal.selfadjointView<Eigen::Lower>().rankUpdate(jac);
    }

    bool accepted = false;
    while (lambda <= cfg.max_damping) {
      sys = normal;
      sys.diagonal().array() += lambda;
      llt.compute(sys);
      if (llt.info() == Eigen::Success) {
        if (primal) {
          step = -llt.solve(grad);
        } else {
          step = -(jac.transpose() * llt.solve(r));
        }
        trial = res.params + step;
        project(trial);
        problem.residuals(trial, trial_r);
        const double f = trial_r.squaredNorm();
        if (std::isfinite(f) && f < res.objective) {
          const double prev = res.objective;
          res.params.swap(trial);
          res.objective = f;
          res.accepted.push_back(f);
          lambda = std::max(lambda / cfg.damping_decrease, 1e-15);
          accepted = true;
          if ((prev - f) <= cfg.relative_tolerance * prev) {
            return res;
          }
          break;
        }
      }
      lambda *= cfg.damping_increase;
    }
    if (!accepted) break;
    problem.jacobian(res.params, r, jac);
  }
  return res;
}

} // namespace updens
