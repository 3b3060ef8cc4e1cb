#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "qflow/functionals.hpp"
#include "qflow/oracles.hpp"
#include "qflow/presets.hpp"

using namespace qflow;
using oracles::FourierParams;
using oracles::heat_fourier;

TEST_CASE("FourierParams truncation control") {
  const FourierParams fp = FourierParams::for_tolerance(1e-2, 1e-10);
  CHECK(fp.tail_bound() <= 1e-10);
  CHECK(fp.n_max >= 1);
  CHECK_THROWS_AS(FourierParams::for_tolerance(0.0), std::invalid_argument);

  // certificate: bound dominates the actual difference to a finer truncation
  const FourierParams coarse{1e-2, 11};
  const FourierParams fine{1e-2, 45};
  for (double t : {0.05, 0.2, 0.4})
    for (double s : {0.1, 0.3, 0.9})
      CHECK(std::abs(heat_fourier(t, s, coarse) - heat_fourier(t, s, fine)) <=
            coarse.tail_bound() + 1e-15);
}

TEST_CASE("heat_fourier values and PDE residual") {
  const FourierParams fp = FourierParams::for_tolerance(1e-2);

  SECTION("initial condition is -1") {
    for (double s : {0.0, 0.25, 0.5, 1.0}) CHECK(heat_fourier(0.0, s, fp) == -1.0);
  }

  SECTION("spatial mean is t - 1") {
    const std::size_t M = 100;
    for (double t : {0.1, 0.3}) {
      double acc = 0.0;
      for (std::size_t i = 0; i < M; ++i)
        acc += heat_fourier(t, (static_cast<double>(i) + 0.5) / M, fp) / M;
      CHECK(acc == Catch::Approx(t - 1.0).margin(1e-10));
    }
  }

  SECTION("PDE residual du/dt - lambda d2u/ds2 - 2s vanishes") {
    const double dt = 1e-4, ds = 3e-4;
    for (double t : {0.1, 0.3})
      for (double s : {0.2, 0.3, 0.5, 0.7}) {
        const double ut = (heat_fourier(t + dt, s, fp) - heat_fourier(t - dt, s, fp)) / (2.0 * dt);
        const double uss = (heat_fourier(t, s + ds, fp) - 2.0 * heat_fourier(t, s, fp) +
                            heat_fourier(t, s - ds, fp)) /
                           (ds * ds);
        CHECK(std::abs(ut - fp.lambda * uss - 2.0 * s) <= 1e-6);
      }
  }

  SECTION("Neumann boundary slopes vanish") {
    // analytic series derivative: every sin(n pi s) term vanishes at s in {0,1}
    for (double t : {0.1, 0.3}) {
      for (double s : {0.0, 1.0}) {
        double deriv = 0.0;
        for (std::size_t n = 1; n <= fp.n_max; n += 2) {
          const double npi = n * oracles::kPi;
          deriv += (-8.0 / (npi * npi * npi * npi)) / fp.lambda *
                   (1.0 - std::exp(-fp.lambda * npi * npi * t)) * (-npi * std::sin(npi * s));
        }
        CHECK(std::abs(deriv) <= 1e-12);
      }
      // one-sided difference sanity
      const double d = 1e-4;
      CHECK(std::abs(heat_fourier(t, d, fp) - heat_fourier(t, 0.0, fp)) / d <= 1e-2);
      CHECK(std::abs(heat_fourier(t, 1.0, fp) - heat_fourier(t, 1.0 - d, fp)) / d <= 1e-2);
    }
  }

  SECTION("rejects out-of-range arguments") {
    CHECK_THROWS_AS(heat_fourier(-1.0, 0.5, fp), std::domain_error);
    CHECK_THROWS_AS(heat_fourier(0.1, 1.5, fp), std::domain_error);
  }
}

TEST_CASE("heat_fourier matches an explicit finite-difference integrator") {
  // independent time-stepping oracle for the linear pre-contact problem
  const double lambda = 1e-2, t_end = 0.1, dt = 1e-6;
  const std::size_t M = 2000;
  const double h = 1.0 / static_cast<double>(M);
  std::vector<double> u(M, -1.0), next(M);
  const double r = lambda * dt / (h * h);
  const std::size_t steps = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t n = 0; n < steps; ++n) {
    for (std::size_t i = 0; i < M; ++i) {
      const double left = (i == 0) ? u[0] : u[i - 1];
      const double right = (i + 1 == M) ? u[M - 1] : u[i + 1];
      const double s = (static_cast<double>(i) + 0.5) * h;
      next[i] = u[i] + r * (left - 2.0 * u[i] + right) + dt * 2.0 * s;
    }
    u.swap(next);
  }
  // interpolate at s = 0.5 between the two neighboring cell centers
  const double fd = 0.5 * (u[M / 2 - 1] + u[M / 2]);
  const FourierParams fp = FourierParams::for_tolerance(lambda);
  CHECK(fd == Catch::Approx(heat_fourier(t_end, 0.5, fp)).margin(1e-4));
}

TEST_CASE("touch_time behavior") {
  const double t2 = oracles::touch_time(1e-2);
  CHECK(t2 > 0.4);
  CHECK(t2 < 0.6);
  const FourierParams fp = FourierParams::for_tolerance(1e-2);
  CHECK(std::abs(heat_fourier(t2, 1.0, fp)) <= 1e-9);

  const double t4 = oracles::touch_time(1e-4);
  CHECK(t4 > 0.45);
  CHECK(t4 < 0.55);

  // strictly before the touch time the whole profile is still negative
  for (int k = 0; k <= 50; ++k)
    CHECK(heat_fourier(t2 - 0.05, static_cast<double>(k) / 50.0, fp) < 0.0);

  CHECK_THROWS_AS(oracles::touch_time(0.0), std::invalid_argument);
}

TEST_CASE("dirac_away_flow closed form") {
  CHECK(oracles::dirac_away_flow(0.0) == -1.0);
  CHECK(oracles::dirac_away_flow(1.0) == -2.0);
  CHECK(oracles::dirac_away_flow(0.25) == -1.25);
  CHECK_THROWS_AS(oracles::dirac_away_flow(-0.1), std::domain_error);
}

TEST_CASE("mmd_squared_bruteforce") {
  CHECK(oracles::mmd_squared_bruteforce({{-1.0, 1.0}}, {{0.0, 1.0}}) == Catch::Approx(1.0));
  const std::vector<WeightedAtom> same{{-0.5, 0.5}, {1.0, 0.5}};
  CHECK(oracles::mmd_squared_bruteforce(same, same) == Catch::Approx(0.0).margin(1e-15));
  CHECK_THROWS_AS(oracles::mmd_squared_bruteforce({{0.0, 0.5}}, same), std::invalid_argument);

  std::mt19937 rng(51);
  std::uniform_real_distribution<double> pos(-2.0, 2.0), wr(0.1, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    auto make = [&](std::size_t n) {
      std::vector<WeightedAtom> a(n);
      double tot = 0.0;
      for (auto& at : a) {
        at = {pos(rng), wr(rng)};
        tot += at.weight;
      }
      for (auto& at : a) at.weight /= tot;
      return a;
    };
    const auto mu = make(2 + rep % 4), nu = make(2 + (rep / 2) % 4);
    const double ab = oracles::mmd_squared_bruteforce(mu, nu);
    CHECK(ab >= -1e-12);
    CHECK(ab == Catch::Approx(oracles::mmd_squared_bruteforce(nu, mu)).margin(1e-12));
  }
}

TEST_CASE("mmd_squared_bruteforce agrees with the quantile functional") {
  std::mt19937 rng(53);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  const std::size_t M = 60;
  const Grid grid = build_grid(M);
  for (int rep = 0; rep < 25; ++rep) {
    auto make = [&](std::size_t n) {
      std::vector<std::size_t> cells(n, 1);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t k = n; k < M; ++k) ++cells[pick(rng)];
      std::vector<WeightedAtom> a(n);
      for (std::size_t k = 0; k < n; ++k)
        a[k] = {pos(rng), static_cast<double>(cells[k]) / static_cast<double>(M)};
      return TargetMeasure::empirical(std::move(a));
    };
    const auto mu = make(5), nu = make(5);
    const auto qu = sample_target_quantile(mu, grid);
    CHECK(mmd_squared(qu, nu) ==
          Catch::Approx(oracles::mmd_squared_bruteforce(mu.atoms(), nu.atoms())).margin(1e-10));
  }
}

TEST_CASE("lambda_convergence_study edge cases") {
  ExperimentPreset p = make_preset("uniform_to_uniform", 32);
  p.config.T = 0.02;

  const auto single = oracles::lambda_convergence_study(p.config, {1e-2});
  REQUIRE(single.size() == 1);
  CHECK(single[0].lambda == 1e-2);
  CHECK(single[0].sup_error > 0.0);

  // stationary configuration: initial equals target, all errors at solver tol
  FlowConfig stat = p.config;
  stat.initial = sample_target_quantile(stat.target, stat.initial.grid);
  const auto table = oracles::lambda_convergence_study(stat, {1e-1, 1e-3});
  for (const auto& e : table) CHECK(e.sup_error <= 1e-9);
}
