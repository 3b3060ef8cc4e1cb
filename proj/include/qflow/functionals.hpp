#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qflow/grid.hpp"
#include "qflow/target.hpp"

namespace qflow {

enum class KernelSign { negative, positive };

enum class SubgradSelection { lower, upper, midpoint };

struct ObjectiveParams {
  double lambda = 1e-2;
  KernelSign kernel_sign = KernelSign::negative;
  TargetMeasure target;

  ObjectiveParams(double lam, KernelSign sign, TargetMeasure tgt)
      : lambda(lam), kernel_sign(sign), target(std::move(tgt)) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("ObjectiveParams: lambda must be >= 0");
  }
};

/// F_nu(u) = int (1-2s)(u - Q_nu) ds + int int |u(s) - Q_nu(t)| dt ds,
/// midpoint rule in s with the inner integral evaluated in closed form.
inline double eval_F_nu(const QuantileVector& u, const TargetMeasure& target) {
  const double h = u.grid.h;
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double s = u.grid.node(i);
    acc += (1.0 - 2.0 * s) * (u[i] - target.quantile(s)) + target.potential_integral(u[i]);
  }
  return acc * h;
}

inline std::vector<double> subgrad_F_nu(const QuantileVector& u, const TargetMeasure& target,
                                        SubgradSelection sel = SubgradSelection::midpoint) {
  std::vector<double> f(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const CdfPair r = target.cdf(u[i]);
    double rv;
    switch (sel) {
      case SubgradSelection::lower: rv = r.r_minus; break;
      case SubgradSelection::upper: rv = r.r_plus; break;
      default: rv = 0.5 * (r.r_minus + r.r_plus); break;
    }
    f[i] = 2.0 * rv - 2.0 * u.grid.node(i);
  }
  return f;
}

/// Sobolev energy (lambda/2) |u - shift|^2_{H1}; shift defaults to zero.
inline double eval_F_H(const QuantileVector& u, double lambda,
                       const QuantileVector* shift = nullptr) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("eval_F_H: lambda must be >= 0");
  if (shift == nullptr) return 0.5 * lambda * h1_energy(u);
  if (shift->grid != u.grid) throw std::invalid_argument("eval_F_H: shift grid mismatch");
  QuantileVector d = u;
  for (std::size_t i = 0; i < u.size(); ++i) d[i] -= (*shift)[i];
  return 0.5 * lambda * h1_energy(d);
}

/// Regularized objective including the cone indicator:
///   negative kernel:  F_nu(u) + F_{H,nu}(u)
///   positive kernel: -F_nu(u) + F_H(u)
/// +infinity outside the monotone cone.
inline double eval_regularized(const QuantileVector& u, const ObjectiveParams& p) {
  if (!is_monotone(u)) return std::numeric_limits<double>::infinity();
  if (p.kernel_sign == KernelSign::negative) {
    const QuantileVector qn = sample_target_quantile(p.target, u.grid);
    return eval_F_nu(u, p.target) + eval_F_H(u, p.lambda, &qn);
  }
  return -eval_F_nu(u, p.target) + eval_F_H(u, p.lambda);
}

/// MMD^2(mu, nu) for the negative distance kernel, as F_nu(u) - F_nu(Q_nu);
/// subtracting the value at the target removes the mu-independent constant.
inline double mmd_squared(const QuantileVector& u, const TargetMeasure& target) {
  const QuantileVector qn = sample_target_quantile(target, u.grid);
  return eval_F_nu(u, target) - eval_F_nu(qn, target);
}

enum class FlowConditionStatus { holds, fails, unknown };

struct FlowConditionResult {
  FlowConditionStatus status = FlowConditionStatus::unknown;
  double worst_violation = 0.0;

  bool holds() const { return status == FlowConditionStatus::holds; }
};

/// Checks that s -> 2s - lambda Q_nu''(s) is nondecreasing across the grid,
/// the condition under which the flow stays in the cone without projection.
inline FlowConditionResult check_flow_condition(const TargetMeasure& target, double lambda,
                                                const Grid& grid) {
  FlowConditionResult res;
  double prev = 0.0;
  bool have_prev = false;
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.M; ++i) {
    const double s = grid.node(i);
    const auto q2 = target.quantile_second_derivative(s);
    if (!q2.has_value()) {
      res.status = FlowConditionStatus::unknown;
      return res;
    }
    const double phi = 2.0 * s - lambda * *q2;
    if (have_prev) worst = std::max(worst, prev - phi);
    prev = phi;
    have_prev = true;
  }
  res.worst_violation = worst;
  res.status = (worst <= 1e-12) ? FlowConditionStatus::holds : FlowConditionStatus::fails;
  return res;
}

}  // namespace qflow
