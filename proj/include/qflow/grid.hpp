#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qflow {

// Absolute slack allowed when testing membership in the monotone cone.
inline constexpr double kMonotoneTol = 1e-10;

/// Cell-centered uniform grid on (0,1): nodes s_i = (i + 1/2)/M.
/// No node touches 0 or 1, so quantile evaluation never hits the
/// endpoint singularities.
struct Grid {
  std::size_t M = 0;
  double h = 0.0;

  double node(std::size_t i) const { return (static_cast<double>(i) + 0.5) * h; }

  std::vector<double> nodes() const {
    std::vector<double> s(M);
    for (std::size_t i = 0; i < M; ++i) s[i] = node(i);
    return s;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline Grid build_grid(std::size_t M) {
  if (M < 2) throw std::invalid_argument("build_grid: M must be >= 2");
  return Grid{M, 1.0 / static_cast<double>(M)};
}

/// Grid-sampled monotone quantile function, the state variable of all flows.
struct QuantileVector {
  Grid grid;
  std::vector<double> values;

  QuantileVector() = default;
  QuantileVector(Grid g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.M)
      throw std::invalid_argument("QuantileVector: size mismatch with grid");
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

/// Largest negative forward difference; <= tol means g is in the cone.
inline double monotonicity_defect(const std::vector<double>& v) {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    worst = std::max(worst, v[i] - v[i + 1]);
  return worst;
}

inline bool is_monotone(const QuantileVector& g, double tol = kMonotoneTol) {
  for (double x : g.values)
    if (!std::isfinite(x)) return false;
  return monotonicity_defect(g.values) <= tol;
}

/// Sample a callable quantile Q(s) on the grid.
template <class F>
QuantileVector sample_quantile(const Grid& grid, F&& q) {
  std::vector<double> v(grid.M);
  for (std::size_t i = 0; i < grid.M; ++i) v[i] = q(grid.node(i));
  return QuantileVector(grid, std::move(v));
}

/// L2(0,1) distance by midpoint quadrature; equals W2 of the pushforward
/// measures since the quantile embedding is an isometry.
inline double wasserstein2(const QuantileVector& u, const QuantileVector& v) {
  if (u.grid != v.grid) throw std::invalid_argument("wasserstein2: grid mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    acc += d * d;
  }
  return std::sqrt(acc * u.grid.h);
}

/// Discrete H1 seminorm, forward differences: sum (g_{i+1}-g_i)^2 / h.
inline double h1_energy(const QuantileVector& g) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    const double d = g[i + 1] - g[i];
    acc += d * d;
  }
  return acc / g.grid.h;
}

inline double sup_distance(const QuantileVector& u, const QuantileVector& v) {
  if (u.grid != v.grid) throw std::invalid_argument("sup_distance: grid mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) m = std::max(m, std::abs(u[i] - v[i]));
  return m;
}

}  // namespace qflow
