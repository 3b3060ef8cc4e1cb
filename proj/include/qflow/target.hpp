#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "qflow/grid.hpp"

namespace qflow {

namespace detail {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kInvSqrt2Pi = 0.3989422804014327;

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

/// Inverse error function. Polynomial seed (Giles) refined by Newton steps
/// against std::erf; relative error is at the rounding level, well below
/// the 1e-9 the Gaussian target needs.
inline double erf_inv(double x) {
  if (!(x > -1.0 && x < 1.0)) throw std::domain_error("erf_inv: x must be in (-1,1)");
  double w = -std::log((1.0 - x) * (1.0 + x));
  double p;
  if (w < 6.25) {
    w -= 3.125;
    p = -3.6444120640178196996e-21;
    p = -1.685059138182016589e-19 + p * w;
    p = 1.2858480715256400167e-18 + p * w;
    p = 1.115787767802518096e-17 + p * w;
    p = -1.333171662854620906e-16 + p * w;
    p = 2.0972767875968561637e-17 + p * w;
    p = 6.6376381343583238325e-15 + p * w;
    p = -4.0545662729752068639e-14 + p * w;
    p = -8.1519341976054721522e-14 + p * w;
    p = 2.6335093153082322977e-12 + p * w;
    p = -1.2975133253453532498e-11 + p * w;
    p = -5.4154120542946279317e-11 + p * w;
    p = 1.051212273321532285e-09 + p * w;
    p = -4.1126339803469836976e-09 + p * w;
    p = -2.9070369957882005086e-08 + p * w;
    p = 4.2347877827932403518e-07 + p * w;
    p = -1.3654692000834678645e-06 + p * w;
    p = -1.3882523362786468719e-05 + p * w;
    p = 0.0001867342080340571352 + p * w;
    p = -0.00074070253416626697512 + p * w;
    p = -0.0060336708714301490533 + p * w;
    p = 0.24015818242558961693 + p * w;
    p = 1.6536545626831027356 + p * w;
  } else if (w < 16.0) {
    w = std::sqrt(w) - 3.25;
    p = 2.2137376921775787049e-09;
    p = 9.0756561938885390979e-08 + p * w;
    p = -2.7517406297064545428e-07 + p * w;
    p = 1.8239629214389227755e-08 + p * w;
    p = 1.5027403968909827627e-06 + p * w;
    p = -4.013867526981545969e-06 + p * w;
    p = 2.9234449089955446044e-06 + p * w;
    p = 1.2475304481671778723e-05 + p * w;
    p = -4.7318229009055733981e-05 + p * w;
    p = 6.8284851459573175448e-05 + p * w;
    p = 2.4031110387097893999e-05 + p * w;
    p = -0.0003550375203628474796 + p * w;
    p = 0.00095328937973738049703 + p * w;
    p = -0.0016882755560235047313 + p * w;
    p = 0.0024914420961078508066 + p * w;
    p = -0.0037512085075692412107 + p * w;
    p = 0.005370914553590063617 + p * w;
    p = 1.0052589676941592334 + p * w;
    p = 3.0838856104922207635 + p * w;
  } else {
    w = std::sqrt(w) - 5.0;
    p = -2.7109920616438573243e-11;
    p = -2.5556418169965252055e-10 + p * w;
    p = 1.5076572693500548083e-09 + p * w;
    p = -3.7894654401267369937e-09 + p * w;
    p = 7.6157012080783393804e-09 + p * w;
    p = -1.4960026627149240478e-08 + p * w;
    p = 2.9147953450901080826e-08 + p * w;
    p = -6.7711997758452339498e-08 + p * w;
    p = 2.2900482228026654717e-07 + p * w;
    p = -9.9298272942317002539e-07 + p * w;
    p = 4.5260625972231537039e-06 + p * w;
    p = -1.9681778105531670567e-05 + p * w;
    p = 7.5995277030017761139e-05 + p * w;
    p = -0.00021503011930044477347 + p * w;
    p = -0.00013871931833623122026 + p * w;
    p = 1.0103004648645343977 + p * w;
    p = 4.849906401408584002 + p * w;
  }
  double y = p * x;
  // Two Newton corrections; d/dy erf(y) = 2/sqrt(pi) exp(-y^2).
  constexpr double two_over_sqrt_pi = 1.1283791670955126;
  for (int k = 0; k < 2; ++k) {
    const double err = std::erf(y) - x;
    y -= err / (two_over_sqrt_pi * std::exp(-y * y));
  }
  return y;
}

inline double normal_quantile(double p) { return kSqrt2 * erf_inv(2.0 * p - 1.0); }

}  // namespace detail

/// Left/right CDF limits at a point; they differ exactly at atoms.
struct CdfPair {
  double r_minus = 0.0;
  double r_plus = 0.0;
};

struct WeightedAtom {
  double location = 0.0;
  double weight = 0.0;
};

namespace target_variant {

struct Dirac {
  double x0 = 0.0;
};

struct Uniform {
  double a = 0.0, b = 1.0;
};

/// Gaussian quantile cut off to the parameter window [cut_lo, cut_hi] and
/// affinely reparametrized to (0,1). The resulting measure is the Gaussian
/// conditioned to its central (cut_hi - cut_lo) quantile range.
struct TruncatedGaussianQuantile {
  double mean = 0.0, stdev = 1.0;
  double cut_lo = 0.0, cut_hi = 1.0;
};

struct Empirical {
  std::vector<WeightedAtom> atoms;  // sorted by location, weights sum to 1
};

struct GridSampled {
  QuantileVector quantile;  // monotone samples; measure = M atoms of mass 1/M
};

}  // namespace target_variant

/// Analytic descriptor of the target measure nu: CDF pair, quantile,
/// boundary quantile slopes and second derivative where available, plus the
/// exact potential integral that the MMD functional needs.
class TargetMeasure {
 public:
  using Variant = std::variant<target_variant::Dirac, target_variant::Uniform,
                               target_variant::TruncatedGaussianQuantile,
                               target_variant::Empirical, target_variant::GridSampled>;

  static TargetMeasure dirac(double x0) { return TargetMeasure(target_variant::Dirac{x0}); }

  static TargetMeasure uniform(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("uniform: requires a < b");
    return TargetMeasure(target_variant::Uniform{a, b});
  }

  static TargetMeasure truncated_gaussian(double mean, double stdev, double cut_lo,
                                          double cut_hi) {
    if (!(stdev > 0.0)) throw std::invalid_argument("truncated_gaussian: stdev must be > 0");
    if (!(0.0 < cut_lo && cut_lo < cut_hi && cut_hi < 1.0))
      throw std::invalid_argument("truncated_gaussian: need 0 < cut_lo < cut_hi < 1");
    return TargetMeasure(target_variant::TruncatedGaussianQuantile{mean, stdev, cut_lo, cut_hi});
  }

  static TargetMeasure empirical(std::vector<WeightedAtom> atoms) {
    if (atoms.empty()) throw std::invalid_argument("empirical: no atoms");
    std::sort(atoms.begin(), atoms.end(),
              [](const WeightedAtom& l, const WeightedAtom& r) { return l.location < r.location; });
    double total = 0.0;
    for (const auto& a : atoms) {
      if (!(a.weight > 0.0)) throw std::invalid_argument("empirical: weights must be > 0");
      total += a.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("empirical: weights must sum to 1");
    return TargetMeasure(target_variant::Empirical{std::move(atoms)});
  }

  static TargetMeasure grid_sampled(QuantileVector q) {
    if (!is_monotone(q)) throw std::invalid_argument("grid_sampled: quantile not monotone");
    return TargetMeasure(target_variant::GridSampled{std::move(q)});
  }

  const Variant& variant() const { return var_; }

  bool is_atomic() const {
    return std::holds_alternative<target_variant::Dirac>(var_) ||
           std::holds_alternative<target_variant::Empirical>(var_) ||
           std::holds_alternative<target_variant::GridSampled>(var_);
  }

  /// Atom representation (location, cumulative weight before/after) used by
  /// the closed-form scalar resolvent; only valid for atomic variants.
  std::vector<WeightedAtom> atoms() const {
    if (auto* d = std::get_if<target_variant::Dirac>(&var_)) return {{d->x0, 1.0}};
    if (auto* e = std::get_if<target_variant::Empirical>(&var_)) return e->atoms;
    if (auto* g = std::get_if<target_variant::GridSampled>(&var_)) {
      const double w = 1.0 / static_cast<double>(g->quantile.size());
      std::vector<WeightedAtom> out;
      out.reserve(g->quantile.size());
      for (double x : g->quantile.values) out.push_back({x, w});
      return out;
    }
    throw std::logic_error("atoms: not an atomic target");
  }

  CdfPair cdf(double x) const {
    return std::visit([&](const auto& t) { return cdf_impl(t, x); }, var_);
  }

  double quantile(double s) const {
    if (!(s > 0.0 && s < 1.0)) throw std::domain_error("quantile: s must be in (0,1)");
    return std::visit([&](const auto& t) { return quantile_impl(t, s); }, var_);
  }

  double quantile_slope_at_0() const {
    return std::visit([&](const auto& t) { return slope_impl(t, true); }, var_);
  }

  double quantile_slope_at_1() const {
    return std::visit([&](const auto& t) { return slope_impl(t, false); }, var_);
  }

  /// nullopt when the variant carries no curvature data (grid samples).
  std::optional<double> quantile_second_derivative(double s) const {
    if (!(s > 0.0 && s < 1.0))
      throw std::domain_error("quantile_second_derivative: s must be in (0,1)");
    return std::visit([&](const auto& t) { return q2_impl(t, s); }, var_);
  }

  /// Exact potential integral  int_0^1 |x - Q_nu(t)| dt.
  double potential_integral(double x) const {
    return std::visit([&](const auto& t) { return pot_impl(t, x); }, var_);
  }

 private:
  explicit TargetMeasure(Variant v) : var_(std::move(v)) {}

  // --- Dirac ---
  static CdfPair cdf_impl(const target_variant::Dirac& t, double x) {
    if (x < t.x0) return {0.0, 0.0};
    if (x > t.x0) return {1.0, 1.0};
    return {0.0, 1.0};
  }
  static double quantile_impl(const target_variant::Dirac& t, double) { return t.x0; }
  static double slope_impl(const target_variant::Dirac&, bool) { return 0.0; }
  static std::optional<double> q2_impl(const target_variant::Dirac&, double) { return 0.0; }
  static double pot_impl(const target_variant::Dirac& t, double x) { return std::abs(x - t.x0); }

  // --- Uniform ---
  static CdfPair cdf_impl(const target_variant::Uniform& t, double x) {
    const double r = std::clamp((x - t.a) / (t.b - t.a), 0.0, 1.0);
    return {r, r};
  }
  static double quantile_impl(const target_variant::Uniform& t, double s) {
    return t.a + (t.b - t.a) * s;
  }
  static double slope_impl(const target_variant::Uniform& t, bool) { return t.b - t.a; }
  static std::optional<double> q2_impl(const target_variant::Uniform&, double) { return 0.0; }
  static double pot_impl(const target_variant::Uniform& t, double x) {
    const double mid = 0.5 * (t.a + t.b);
    if (x <= t.a) return mid - x;
    if (x >= t.b) return x - mid;
    const double da = x - t.a, db = t.b - x;
    return 0.5 * (da * da + db * db) / (t.b - t.a);
  }

  // --- Truncated Gaussian quantile ---
  // Q(s) = mean + stdev * Phi^{-1}(cut_lo + c s),  c = cut_hi - cut_lo.
  static double tg_z(const target_variant::TruncatedGaussianQuantile& t, double s) {
    const double c = t.cut_hi - t.cut_lo;
    return detail::normal_quantile(t.cut_lo + c * s);
  }
  static CdfPair cdf_impl(const target_variant::TruncatedGaussianQuantile& t, double x) {
    const double c = t.cut_hi - t.cut_lo;
    const double p = detail::normal_cdf((x - t.mean) / t.stdev);
    const double r = std::clamp((p - t.cut_lo) / c, 0.0, 1.0);
    return {r, r};
  }
  static double quantile_impl(const target_variant::TruncatedGaussianQuantile& t, double s) {
    return t.mean + t.stdev * tg_z(t, s);
  }
  static double slope_impl(const target_variant::TruncatedGaussianQuantile& t, bool at_zero) {
    const double c = t.cut_hi - t.cut_lo;
    const double z = detail::normal_quantile(at_zero ? t.cut_lo : t.cut_hi);
    return t.stdev * c / detail::normal_pdf(z);
  }
  static std::optional<double> q2_impl(const target_variant::TruncatedGaussianQuantile& t,
                                       double s) {
    // Q'' = stdev c^2 z / phi(z)^2, the chain rule applied to Phi^{-1}.
    const double c = t.cut_hi - t.cut_lo;
    const double z = tg_z(t, s);
    const double phi = detail::normal_pdf(z);
    return t.stdev * c * c * z / (phi * phi);
  }
  static double pot_impl(const target_variant::TruncatedGaussianQuantile& t, double x) {
    // Uses int Phi^{-1}(p) dp = -phi(Phi^{-1}(p)), giving a closed-form
    // antiderivative S(P) = int_0^P Q(t) dt.
    const double c = t.cut_hi - t.cut_lo;
    const double P = cdf_impl(t, x).r_plus;
    const double z_lo = detail::normal_quantile(t.cut_lo);
    const double z_hi = detail::normal_quantile(t.cut_hi);
    auto S = [&](double p_frac, double z_at) {
      return t.mean * p_frac + (t.stdev / c) * (detail::normal_pdf(z_lo) - detail::normal_pdf(z_at));
    };
    const double zP = (P <= 0.0) ? z_lo : (P >= 1.0) ? z_hi : (x - t.mean) / t.stdev;
    const double S_tot = S(1.0, z_hi);
    const double S_P = S(P, zP);
    return x * (2.0 * P - 1.0) + S_tot - 2.0 * S_P;
  }

  // --- Empirical ---
  static CdfPair cdf_impl(const target_variant::Empirical& t, double x) {
    double lo = 0.0, hi = 0.0;
    for (const auto& a : t.atoms) {
      if (a.location < x) lo += a.weight;
      if (a.location <= x) hi += a.weight;
    }
    return {std::min(lo, 1.0), std::min(hi, 1.0)};
  }
  static double quantile_impl(const target_variant::Empirical& t, double s) {
    double cum = 0.0;
    for (const auto& a : t.atoms) {
      cum += a.weight;
      if (cum >= s) return a.location;
    }
    return t.atoms.back().location;
  }
  static double slope_impl(const target_variant::Empirical&, bool) { return 0.0; }
  static std::optional<double> q2_impl(const target_variant::Empirical&, double) { return 0.0; }
  static double pot_impl(const target_variant::Empirical& t, double x) {
    double acc = 0.0;
    for (const auto& a : t.atoms) acc += a.weight * std::abs(x - a.location);
    return acc;
  }

  // --- Grid sampled ---
  static CdfPair cdf_impl(const target_variant::GridSampled& t, double x) {
    const auto& v = t.quantile.values;
    const double M = static_cast<double>(v.size());
    const auto lo = std::lower_bound(v.begin(), v.end(), x) - v.begin();
    const auto hi = std::upper_bound(v.begin(), v.end(), x) - v.begin();
    return {static_cast<double>(lo) / M, static_cast<double>(hi) / M};
  }
  static double quantile_impl(const target_variant::GridSampled& t, double s) {
    const auto& v = t.quantile.values;
    const double M = static_cast<double>(v.size());
    const auto idx = static_cast<std::size_t>(
        std::clamp(std::ceil(s * M) - 1.0, 0.0, M - 1.0));
    return v[idx];
  }
  static double slope_impl(const target_variant::GridSampled& t, bool at_zero) {
    const auto& v = t.quantile.values;
    const double h = t.quantile.grid.h;
    return at_zero ? (v[1] - v[0]) / h : (v[v.size() - 1] - v[v.size() - 2]) / h;
  }
  static std::optional<double> q2_impl(const target_variant::GridSampled&, double) {
    return std::nullopt;
  }
  static double pot_impl(const target_variant::GridSampled& t, double x) {
    double acc = 0.0;
    for (double q : t.quantile.values) acc += std::abs(x - q);
    return acc / static_cast<double>(t.quantile.size());
  }

  Variant var_;
};

inline double quantile_eval(const TargetMeasure& target, double s) { return target.quantile(s); }

inline CdfPair cdf_eval(const TargetMeasure& target, double x) { return target.cdf(x); }

inline QuantileVector sample_target_quantile(const TargetMeasure& target, const Grid& grid) {
  return sample_quantile(grid, [&](double s) { return target.quantile(s); });
}

}  // namespace qflow
