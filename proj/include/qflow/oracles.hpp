#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qflow/flow.hpp"
#include "qflow/grid.hpp"
#include "qflow/target.hpp"

namespace qflow::oracles {

inline constexpr double kPi = 3.141592653589793;

/// Truncated Fourier series of the pre-contact heat phase; only odd
/// cosine modes contribute.
struct FourierParams {
  double lambda = 1e-2;
  std::size_t n_max = 1;  // highest retained odd mode

  /// Tail of the coefficient series past n_max:
  /// (8/lambda) sum_{odd n > n_max} (n pi)^-4 <= 8/(6 lambda pi^4 n_max^3).
  double tail_bound() const {
    const double N = static_cast<double>(n_max);
    return 8.0 / (6.0 * lambda * kPi * kPi * kPi * kPi * N * N * N);
  }

  static FourierParams for_tolerance(double lambda, double tol = 1e-10) {
    if (!(lambda > 0.0)) throw std::invalid_argument("FourierParams: lambda must be > 0");
    const double N = std::cbrt(8.0 / (6.0 * lambda * kPi * kPi * kPi * kPi * tol));
    std::size_t n = static_cast<std::size_t>(std::ceil(N));
    if (n % 2 == 0) ++n;
    return FourierParams{lambda, std::max<std::size_t>(n, 1)};
  }
};

/// u(t,s) = (t-1) + (1/lambda) sum_{n odd} (-8)(n pi)^-4 (1 - e^{-lambda (n pi)^2 t}) cos(n pi s)
inline double heat_fourier(double t, double s, const FourierParams& fp) {
  if (!(t >= 0.0)) throw std::domain_error("heat_fourier: t must be >= 0");
  if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("heat_fourier: s must be in [0,1]");
  double acc = t - 1.0;
  for (std::size_t n = 1; n <= fp.n_max; n += 2) {
    const double npi = static_cast<double>(n) * kPi;
    const double coeff = -8.0 / (npi * npi * npi * npi);
    acc += coeff / fp.lambda * (1.0 - std::exp(-fp.lambda * npi * npi * t)) * std::cos(npi * s);
  }
  return acc;
}

/// First time the heat-phase solution touches the target value 0. The
/// maximum of u in s is verified by scanning before bisecting on u(t, 1).
inline double touch_time(double lambda, double tol = 1e-10) {
  if (!(lambda > 0.0)) throw std::invalid_argument("touch_time: lambda must be > 0");
  const FourierParams fp = FourierParams::for_tolerance(lambda, std::min(tol, 1e-12));

  double hi = 1.0;
  while (heat_fourier(hi, 1.0, fp) < 0.0) hi *= 2.0;

  // confirm the spatial maximum sits at s = 1
  const double t_probe = 0.5 * hi;
  const double u_end = heat_fourier(t_probe, 1.0, fp);
  for (int k = 0; k <= 100; ++k) {
    const double s = static_cast<double>(k) / 100.0;
    if (heat_fourier(t_probe, s, fp) > u_end + 1e-9)
      throw std::logic_error("touch_time: spatial maximum not at s=1");
  }

  double lo = 0.0;
  while (true) {
    const double mid = 0.5 * (lo + hi);
    const double u = heat_fourier(mid, 1.0, fp);
    if (std::abs(u) < tol || hi - lo < 1e-14) return mid;
    (u < 0.0 ? lo : hi) = mid;
  }
}

/// Closed-form repulsive flow from delta_{-1} away from delta_0.
inline double dirac_away_flow(double t) {
  if (!(t >= 0.0)) throw std::domain_error("dirac_away_flow: t must be >= 0");
  return -1.0 - t;
}

/// MMD^2 for K = -|x-y| as explicit double sums over weighted atoms.
inline double mmd_squared_bruteforce(const std::vector<WeightedAtom>& mu_atoms,
                                     const std::vector<WeightedAtom>& nu_atoms) {
  auto check = [](const std::vector<WeightedAtom>& atoms) {
    double total = 0.0;
    for (const auto& a : atoms) total += a.weight;
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("mmd_squared_bruteforce: weights must sum to 1");
  };
  check(mu_atoms);
  check(nu_atoms);
  auto pair_sum = [](const std::vector<WeightedAtom>& p, const std::vector<WeightedAtom>& q) {
    double acc = 0.0;
    for (const auto& a : p)
      for (const auto& b : q) acc += a.weight * b.weight * (-std::abs(a.location - b.location));
    return acc;
  };
  return 0.5 * pair_sum(mu_atoms, mu_atoms) - pair_sum(mu_atoms, nu_atoms) +
         0.5 * pair_sum(nu_atoms, nu_atoms);
}

struct LambdaError {
  double lambda = 0.0;
  double sup_error = 0.0;
};

/// For each lambda, the sup over stored checkpoints of the L2 distance to
/// the unregularized (lambda = 0) trajectory of the same configuration.
inline std::vector<LambdaError> lambda_convergence_study(const FlowConfig& base_cfg,
                                                         const std::vector<double>& lambdas) {
  FlowConfig ref_cfg = base_cfg;
  ref_cfg.lambda = 0.0;
  const Trajectory ref = run_flow(ref_cfg);

  std::vector<LambdaError> table;
  table.reserve(lambdas.size());
  for (double lam : lambdas) {
    FlowConfig cfg = base_cfg;
    cfg.lambda = lam;
    const Trajectory traj = run_flow(cfg);
    if (traj.aborted || traj.states.size() != ref.states.size())
      throw std::runtime_error("lambda_convergence_study: run failed or checkpoint mismatch");
    double sup = 0.0;
    for (std::size_t k = 0; k < traj.states.size(); ++k)
      sup = std::max(sup, wasserstein2(traj.states[k], ref.states[k]));
    table.push_back({lam, sup});
  }
  return table;
}

}  // namespace qflow::oracles
