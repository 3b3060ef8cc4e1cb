#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qflow/flow_positive.hpp"
#include "qflow/oracles.hpp"
#include "qflow/presets.hpp"

using namespace qflow;

TEST_CASE("gmm_step on constant quantiles around a Dirac target") {
  const Grid grid = build_grid(64);
  const auto dirac = TargetMeasure::dirac(0.0);
  const ObjectiveParams p(1e-2, KernelSign::positive, dirac);
  const double tau = 1e-3;

  SECTION("below the atom: constant speed away") {
    const auto g = sample_quantile(grid, [](double) { return -1.0; });
    const auto v = gmm_step(g, tau, p);
    for (std::size_t i = 0; i < grid.M; ++i)
      CHECK(v[i] == Catch::Approx(-1.0 - tau).margin(1e-7));
  }

  SECTION("above the atom: mirror case") {
    const auto g = sample_quantile(grid, [](double) { return 1.0; });
    const auto v = gmm_step(g, tau, p);
    for (std::size_t i = 0; i < grid.M; ++i)
      CHECK(v[i] == Catch::Approx(1.0 + tau).margin(1e-7));
  }

  SECTION("step objective never increases") {
    const auto g = sample_quantile(grid, [](double s) { return -2.0 + 0.5 * s; });
    const auto [v, rep] = gmm_step_with_report(g, tau, p);
    CHECK(rep.converged);
    auto phi = [&](const QuantileVector& u) {
      double prox = 0.0;
      for (std::size_t i = 0; i < grid.M; ++i) {
        const double d = u[i] - g[i];
        prox += d * d;
      }
      return -eval_F_nu(u, dirac) + eval_F_H(u, p.lambda) +
             0.5 * grid.h * prox / tau;
    };
    CHECK(phi(v) <= phi(g) + 1e-12);
    CHECK(is_monotone(v));
  }

  SECTION("rejects the negative kernel and nonmonotone input") {
    const ObjectiveParams pn(1e-2, KernelSign::negative, dirac);
    const auto g = sample_quantile(grid, [](double) { return -1.0; });
    CHECK_THROWS_AS(gmm_step(g, tau, pn), std::invalid_argument);
    QuantileVector bad(build_grid(2), {1.0, 0.0});
    CHECK_THROWS_AS(gmm_step(bad, tau, p), std::invalid_argument);
  }
}

TEST_CASE("discrete GMM trajectory equals -1 - n tau") {
  ExperimentPreset p = make_preset("dirac_away", 32);
  p.config.T = 0.01;  // 10 steps
  const Trajectory traj = run_flow_positive(p.config);
  REQUIRE(traj.total_steps == 10);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double want = oracles::dirac_away_flow(traj.times[k]);
    for (double v : traj.states[k].values) CHECK(v == Catch::Approx(want).margin(1e-6));
  }
}

TEST_CASE("run_flow_positive invariants") {
  ExperimentPreset p = make_preset("dirac_away", 64);
  p.config.T = 0.05;
  p.config.output_stride = 10;
  const Trajectory traj = run_flow_positive(p.config);
  CHECK_FALSE(traj.aborted);
  CHECK(traj.worst_cone_defect <= 1e-10);
  CHECK(traj.worst_energy_decay_violation <= 1e-9);
  for (std::size_t k = 1; k < traj.energies.size(); ++k)
    CHECK(traj.energies[k] <= traj.energies[k - 1] + 1e-9);
  const auto& fin = traj.final_state();
  for (double v : fin.values)
    CHECK(v == Catch::Approx(-1.0 - p.config.T).margin(2.0 * p.config.tau));
}

TEST_CASE("run_flow_positive with T below tau keeps the initial state") {
  ExperimentPreset p = make_preset("dirac_away", 16);
  p.config.T = 1e-5;
  const Trajectory traj = run_flow_positive(p.config);
  CHECK(traj.total_steps == 0);
  REQUIRE(traj.states.size() == 1);
  CHECK(sup_distance(traj.states[0], p.config.initial) == 0.0);
}

TEST_CASE("run_flow_positive rejects the negative kernel") {
  ExperimentPreset p = make_preset("dirac_to_dirac", 16);
  CHECK_THROWS_AS(run_flow_positive(p.config), std::invalid_argument);
}
