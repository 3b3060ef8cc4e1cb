#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qflow/flow.hpp"
#include "qflow/functionals.hpp"
#include "qflow/grid.hpp"
#include "qflow/numerics.hpp"

namespace qflow {

namespace detail_gmm {

/// Pointwise gradient of the smooth parts of the step objective:
/// -(1-2s) (linear part of -F_nu), the Sobolev quadratic, and the proximity.
inline void smooth_gradient(const std::vector<double>& v, const QuantileVector& g_n,
                            double lambda, double tau, std::vector<double>& grad) {
  const std::size_t M = v.size();
  const Grid& grid = g_n.grid;
  const double inv_h2 = 1.0 / (grid.h * grid.h);
  for (std::size_t i = 0; i < M; ++i) {
    const double left = (i == 0) ? v[0] : v[i - 1];     // reflected ghosts
    const double right = (i + 1 == M) ? v[M - 1] : v[i + 1];
    const double lap = (left - 2.0 * v[i] + right) * inv_h2;
    grad[i] = -(1.0 - 2.0 * grid.node(i)) - lambda * lap + (v[i] - g_n[i]) / tau;
  }
}

}  // namespace detail_gmm

/// One generalized-minimizing-movement step for the positive kernel:
/// proximal gradient with isotonic projection and a monotone line search,
/// initialized at g_n, so the step objective never increases.
inline std::pair<QuantileVector, ProxReport> gmm_step_with_report(
    const QuantileVector& g_n, double tau, const ObjectiveParams& p, double tol = 1e-10,
    std::size_t max_iter = 100000) {
  if (p.kernel_sign != KernelSign::positive)
    throw std::invalid_argument("gmm_step: positive kernel only");
  if (!(tau > 0.0)) throw std::invalid_argument("gmm_step: tau must be > 0");
  if (!is_monotone(g_n)) throw std::invalid_argument("gmm_step: g_n not monotone");

  const Grid& grid = g_n.grid;
  const std::size_t M = grid.M;
  const double h = grid.h;

  auto objective = [&](const QuantileVector& v) {
    double prox = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const double d = v[i] - g_n[i];
      prox += d * d;
    }
    return -eval_F_nu(v, p.target) + eval_F_H(v, p.lambda) + 0.5 * h * prox / tau;
  };

  // conservative step size below 1/L for the smooth quadratic part
  const double eta0 = 1.0 / (1.0 / tau + 4.0 * p.lambda / (h * h) + 1.0);

  QuantileVector v = g_n;
  double phi = objective(v);
  std::vector<double> grad(M), trial(M);
  ProxReport report;

  for (std::size_t it = 1; it <= max_iter; ++it) {
    detail_gmm::smooth_gradient(v.values, g_n, p.lambda, tau, grad);
    for (std::size_t i = 0; i < M; ++i) {
      const CdfPair r = p.target.cdf(v[i]);
      grad[i] += 1.0 - (r.r_minus + r.r_plus);  // subgradient of the concave part
    }

    double eta = eta0;
    bool accepted = false;
    QuantileVector v_next = v;
    double phi_next = phi;
    while (eta > 1e-6 * eta0) {
      for (std::size_t i = 0; i < M; ++i) trial[i] = v[i] - eta * grad[i];
      QuantileVector cand(grid, project_isotonic(trial));
      const double phi_cand = objective(cand);
      if (phi_cand <= phi) {
        v_next = std::move(cand);
        phi_next = phi_cand;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }

    double res = 0.0;
    for (std::size_t i = 0; i < M; ++i) res = std::max(res, std::abs(v_next[i] - v[i]));
    report.iterations = it;
    report.residual = res;
    if (!accepted || res < tol) {
      report.converged = true;
      v = std::move(v_next);
      break;
    }
    v = std::move(v_next);
    phi = phi_next;
  }
  if (!report.converged) throw ProxFailure(report);
  return {std::move(v), report};
}

inline QuantileVector gmm_step(const QuantileVector& g_n, double tau, const ObjectiveParams& p,
                               double tol = 1e-10) {
  return gmm_step_with_report(g_n, tau, p, tol).first;
}

/// GMM driver for the repulsive kernel; every state is monotone by
/// construction and the step objective is non-increasing per step.
inline Trajectory run_flow_positive(const FlowConfig& cfg) {
  cfg.validate();
  if (cfg.kernel_sign != KernelSign::positive)
    throw std::invalid_argument("run_flow_positive: positive kernel only");

  const ObjectiveParams params = cfg.objective();
  Trajectory traj;
  traj.condition = FlowConditionResult{FlowConditionStatus::unknown, 0.0};

  QuantileVector g = cfg.initial;
  detail_flow::record_state(traj, 0.0, g, params);

  const std::size_t N =
      (cfg.T < cfg.tau) ? 0
                        : static_cast<std::size_t>(std::ceil(cfg.T / cfg.tau - 1e-9));
  double prev_energy = traj.energies.front();

  for (std::size_t n = 1; n <= N; ++n) {
    QuantileVector g_next = g;
    try {
      g_next = gmm_step(g, cfg.tau, params, cfg.solver_tol);
    } catch (const ProxFailure& e) {
      traj.aborted = true;
      traj.abort_reason = e.what();
      break;
    }

    traj.worst_cone_defect = std::max(traj.worst_cone_defect, monotonicity_defect(g_next.values));
    const double step_norm = detail_flow::l2_norm(g_next.values, g.values, g.grid.h);
    traj.step_norms.push_back(step_norm);

    const double energy = eval_regularized(g_next, params);
    traj.worst_energy_decay_violation =
        std::max(traj.worst_energy_decay_violation,
                 energy + 0.5 * step_norm * step_norm / cfg.tau - prev_energy);
    prev_energy = energy;

    g = std::move(g_next);
    traj.total_steps = n;
    if (n % cfg.output_stride == 0 || n == N) {
      traj.times.push_back(static_cast<double>(n) * cfg.tau);
      traj.states.push_back(g);
      traj.slopes.push_back(finite_difference_slopes(g));
      traj.energies.push_back(energy);
    }
  }
  return traj;
}

}  // namespace qflow
