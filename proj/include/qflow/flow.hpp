#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qflow/density.hpp"
#include "qflow/functionals.hpp"
#include "qflow/grid.hpp"
#include "qflow/numerics.hpp"
#include "qflow/target.hpp"

namespace qflow {

struct FlowConfig {
  double tau = 1e-3;
  double lambda = 1e-2;  // 0 = unregularized
  std::size_t M = 400;
  double T = 1.0;
  KernelSign kernel_sign = KernelSign::negative;
  TargetMeasure target;
  QuantileVector initial;
  double solver_tol = 1e-10;
  std::size_t max_iter = kProxMaxIterDefault;
  std::size_t output_stride = 1;

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("FlowConfig: tau must be > 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("FlowConfig: lambda must be >= 0");
    if (!(T >= 0.0)) throw std::invalid_argument("FlowConfig: T must be >= 0");
    if (M < 2) throw std::invalid_argument("FlowConfig: M must be >= 2");
    if (initial.size() != M) throw std::invalid_argument("FlowConfig: initial/grid size mismatch");
    if (!is_monotone(initial)) throw std::invalid_argument("FlowConfig: initial not monotone");
    if (output_stride == 0) throw std::invalid_argument("FlowConfig: output_stride must be >= 1");
  }

  ObjectiveParams objective() const { return ObjectiveParams(lambda, kernel_sign, target); }
};

/// Time-stamped flow states plus per-step diagnostics. Only every
/// output_stride-th state is stored; the invariants are checked every step.
struct Trajectory {
  std::vector<double> times;
  std::vector<QuantileVector> states;
  std::vector<std::vector<double>> slopes;
  std::vector<double> energies;       // eval_regularized at stored states
  std::vector<double> step_norms;     // ||g_{n+1} - g_n||_{L2}, all steps
  FlowConditionResult condition;
  double worst_cone_defect = 0.0;
  double worst_energy_decay_violation = 0.0;  // positive means a violated step
  std::size_t projected_steps = 0;
  std::size_t total_steps = 0;
  bool aborted = false;
  std::string abort_reason;

  const QuantileVector& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }
};

inline QuantileVector euler_step_unregularized(const QuantileVector& g_n, double tau,
                                               const TargetMeasure& target) {
  QuantileVector g_next = g_n;
  for (std::size_t i = 0; i < g_n.size(); ++i) {
    const double s = g_n.grid.node(i);
    g_next[i] = scalar_resolvent(g_n[i] + 2.0 * tau * s, 2.0 * tau, target);
  }
  return g_next;
}

inline QuantileVector euler_step_regularized(const QuantileVector& g_n, const FlowConfig& cfg,
                                             std::vector<double>* warm_z = nullptr) {
  if (!(cfg.lambda > 0.0))
    throw std::invalid_argument("euler_step_regularized: lambda must be > 0");
  auto [g_next, report] = solve_prox_subproblem(g_n, cfg.tau, cfg.objective(), cfg.solver_tol,
                                                cfg.max_iter, warm_z);
  (void)report;
  return g_next;
}

/// Smallest grid node s from which |g - anchor| < tol all the way to s=1;
/// returns 1 when there is no contact.
inline double detect_free_boundary(const QuantileVector& g, double anchor = 0.0,
                                   double tol = kAtomTolDefault) {
  if (!is_monotone(g)) throw std::invalid_argument("detect_free_boundary: g not monotone");
  std::size_t first = g.size();
  for (std::size_t i = g.size(); i-- > 0;) {
    if (std::abs(g[i] - anchor) < tol)
      first = i;
    else
      break;
  }
  if (first == g.size()) return 1.0;
  return g.grid.node(first);
}

namespace detail_flow {

inline double l2_norm(const std::vector<double>& a, const std::vector<double>& b, double h) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc * h);
}

inline void record_state(Trajectory& traj, double t, const QuantileVector& g,
                         const ObjectiveParams& p) {
  traj.times.push_back(t);
  traj.states.push_back(g);
  traj.slopes.push_back(finite_difference_slopes(g));
  traj.energies.push_back(eval_regularized(g, p));
}

}  // namespace detail_flow

/// Implicit Euler driver for the negative kernel, dispatching on lambda = 0
/// (pointwise resolvent) versus lambda > 0 (prox subproblem). When the flow
/// condition fails or is unknown, nonmonotone iterates are projected back
/// onto the cone and the step is flagged.
inline Trajectory run_flow(const FlowConfig& cfg) {
  cfg.validate();
  if (cfg.kernel_sign != KernelSign::negative)
    throw std::invalid_argument("run_flow: negative kernel only; use run_flow_positive");

  const ObjectiveParams params = cfg.objective();
  Trajectory traj;
  traj.condition = (cfg.lambda > 0.0)
                       ? check_flow_condition(cfg.target, cfg.lambda, cfg.initial.grid)
                       : FlowConditionResult{FlowConditionStatus::holds, 0.0};

  QuantileVector g = cfg.initial;
  detail_flow::record_state(traj, 0.0, g, params);

  const std::size_t N =
      (cfg.T < cfg.tau) ? 0
                        : static_cast<std::size_t>(std::ceil(cfg.T / cfg.tau - 1e-9));
  std::vector<double> warm_z;
  double prev_energy = traj.energies.front();

  for (std::size_t n = 1; n <= N; ++n) {
    QuantileVector g_next = g;
    try {
      g_next = (cfg.lambda > 0.0) ? euler_step_regularized(g, cfg, &warm_z)
                                  : euler_step_unregularized(g, cfg.tau, cfg.target);
    } catch (const ProxFailure& e) {
      traj.aborted = true;
      traj.abort_reason = e.what();
      break;
    }

    const double defect = monotonicity_defect(g_next.values);
    if (defect > kMonotoneTol && !traj.condition.holds()) {
      g_next = project_isotonic(g_next);
      ++traj.projected_steps;
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
