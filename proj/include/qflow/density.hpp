#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qflow/grid.hpp"

namespace qflow {

inline constexpr double kAtomTolDefault = 1e-3;
inline constexpr double kSlopeFloor = 1e-8;

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

struct DensitySample {
  double x = 0.0;  // position
  double f = 0.0;  // density value, 1/g'
};

/// A measure split into atoms and an absolutely continuous part sampled
/// along the quantile grid. Each density sample accounts for mass h in s,
/// so total mass = sum of atom masses + h * (#density samples).
struct DensityProfile {
  std::vector<Atom> atoms;
  std::vector<DensitySample> density_samples;
  double h = 0.0;

  double total_mass() const {
    double m = static_cast<double>(density_samples.size()) * h;
    for (const auto& a : atoms) m += a.mass;
    return m;
  }
};

/// Splits the quantile into a singular part (cells where g sits within
/// atom_tol of the anchor, or where the slope has collapsed) and a density
/// part f(g_i) = 1/g'_i on the remaining cells.
inline DensityProfile density_from_quantile(const QuantileVector& g,
                                            const std::vector<double>& g_slope,
                                            double atom_tol = kAtomTolDefault,
                                            double atom_anchor = 0.0,
                                            double slope_floor = kSlopeFloor) {
  if (!(atom_tol > 0.0)) throw std::invalid_argument("density_from_quantile: atom_tol must be > 0");
  if (g_slope.size() != g.size())
    throw std::invalid_argument("density_from_quantile: slope size mismatch");
  if (!is_monotone(g)) throw std::invalid_argument("density_from_quantile: g not monotone");

  const double h = g.grid.h;
  DensityProfile out;
  out.h = h;

  enum class Kind { Anchor, Flat, Density };
  auto classify = [&](std::size_t i) {
    if (std::abs(g[i] - atom_anchor) < atom_tol) return Kind::Anchor;
    if (g_slope[i] <= slope_floor) return Kind::Flat;
    return Kind::Density;
  };

  std::size_t i = 0;
  while (i < g.size()) {
    const Kind k = classify(i);
    if (k == Kind::Density) {
      out.density_samples.push_back({g[i], 1.0 / g_slope[i]});
      ++i;
      continue;
    }
    std::size_t j = i;
    double sum = 0.0;
    while (j < g.size() && classify(j) == k) {
      sum += g[j];
      ++j;
    }
    const double mass = static_cast<double>(j - i) * h;
    const double loc = (k == Kind::Anchor) ? atom_anchor : sum / static_cast<double>(j - i);
    out.atoms.push_back({loc, mass});
    i = j;
  }
  return out;
}

/// Convenience overload using centered finite-difference slopes.
inline std::vector<double> finite_difference_slopes(const QuantileVector& g) {
  const std::size_t M = g.size();
  const double h = g.grid.h;
  std::vector<double> d(M);
  if (M == 1) {
    d[0] = 0.0;
    return d;
  }
  d[0] = (g[1] - g[0]) / h;
  for (std::size_t i = 1; i + 1 < M; ++i) d[i] = (g[i + 1] - g[i - 1]) / (2.0 * h);
  d[M - 1] = (g[M - 1] - g[M - 2]) / h;
  return d;
}

inline DensityProfile density_from_quantile(const QuantileVector& g,
                                            double atom_tol = kAtomTolDefault,
                                            double atom_anchor = 0.0) {
  return density_from_quantile(g, finite_difference_slopes(g), atom_tol, atom_anchor);
}

}  // namespace qflow
