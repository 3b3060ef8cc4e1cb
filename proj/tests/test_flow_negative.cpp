#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qflow/flow.hpp"
#include "qflow/oracles.hpp"
#include "qflow/presets.hpp"

using namespace qflow;

TEST_CASE("euler_step_unregularized closed forms") {
  const Grid grid = build_grid(128);
  const auto dirac = TargetMeasure::dirac(0.0);
  const double tau = 1e-3;

  SECTION("free fall below the atom") {
    const auto g = sample_quantile(grid, [](double) { return -1.0; });
    const auto next = euler_step_unregularized(g, tau, dirac);
    for (std::size_t i = 0; i < grid.M; ++i)
      CHECK(next[i] == Catch::Approx(-1.0 + 2.0 * tau * grid.node(i)).margin(1e-14));
  }

  SECTION("continuous target quantile is a fixed point") {
    const auto unif = TargetMeasure::uniform(-1.0, 2.0);
    const auto q = sample_target_quantile(unif, grid);
    const auto next = euler_step_unregularized(q, tau, unif);
    CHECK(sup_distance(next, q) <= 1e-12);
  }

  SECTION("mass sticks at the atom") {
    // choose g_n so that g_n + 2 tau s lands inside [0, 2 tau]
    const auto g = sample_quantile(grid, [tau](double s) { return tau - 2.0 * tau * s; });
    const auto sorted = project_isotonic(g);  // make it monotone: it is decreasing
    const auto next = euler_step_unregularized(sorted, tau, dirac);
    // the pooled constant c satisfies c + 2 tau s in [0, 2 tau] for mid s
    for (std::size_t i = grid.M / 4; i < 3 * grid.M / 4; ++i) CHECK(next[i] == 0.0);
  }
}

TEST_CASE("euler_step_regularized matches the Fourier oracle after one step") {
  ExperimentPreset p = make_preset("dirac_to_dirac");  // M=400, tau=1e-3, lambda=1e-2
  const auto next = euler_step_regularized(p.config.initial, p.config);
  const auto fp = oracles::FourierParams::for_tolerance(p.config.lambda);
  double sup = 0.0;
  for (std::size_t i = 0; i < next.size(); ++i)
    sup = std::max(sup,
                   std::abs(next[i] - oracles::heat_fourier(p.config.tau, next.grid.node(i), fp)));
  CHECK(sup <= 5e-3);
  CHECK(is_monotone(next));
}

TEST_CASE("regularized step is stationary at the target quantile") {
  const Grid grid = build_grid(64);
  const auto unif = TargetMeasure::uniform(0.0, 1.0);
  FlowConfig cfg{1e-3, 1e-2, grid.M, 1.0, KernelSign::negative, unif,
                 sample_target_quantile(unif, grid)};
  const auto next = euler_step_regularized(cfg.initial, cfg);
  CHECK(sup_distance(next, cfg.initial) <= 1e-8);
}

TEST_CASE("stationarity over 100 steps") {
  const Grid grid = build_grid(64);
  const auto unif = TargetMeasure::uniform(0.0, 1.0);
  FlowConfig cfg{2e-3, 1e-2, grid.M, 100 * 2e-3, KernelSign::negative, unif,
                 sample_target_quantile(unif, grid)};
  cfg.output_stride = 100;
  const Trajectory traj = run_flow(cfg);
  CHECK(traj.total_steps == 100);
  CHECK(sup_distance(traj.final_state(), cfg.initial) <= 1e-9);
}

TEST_CASE("run_flow structure and invariants on a short Dirac run") {
  ExperimentPreset p = make_preset("dirac_to_dirac", 100);
  p.config.T = 0.05;
  const Trajectory traj = run_flow(p.config);
  CHECK(traj.total_steps == 50);
  REQUIRE(traj.times.size() == traj.states.size());
  REQUIRE(traj.slopes.size() == traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    CHECK(is_monotone(traj.states[k]));
    if (k > 0) {
      CHECK(traj.times[k] > traj.times[k - 1]);
      CHECK(traj.energies[k] <= traj.energies[k - 1] + 1e-9);
    }
  }
  CHECK(traj.worst_cone_defect <= 1e-10);
  CHECK(traj.worst_energy_decay_violation <= 1e-9);
  CHECK(traj.projected_steps == 0);
  CHECK(traj.condition.holds());
}

TEST_CASE("mean dynamics in the pre-contact heat phase") {
  ExperimentPreset p = make_preset("dirac_to_dirac", 100);
  p.config.T = 0.2;
  p.config.output_stride = 50;
  const Trajectory traj = run_flow(p.config);
  const double h2 = p.config.initial.grid.h * p.config.initial.grid.h;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    double mean = 0.0;
    for (double v : traj.states[k].values) mean += v;
    mean /= static_cast<double>(traj.states[k].size());
    CHECK(mean == Catch::Approx(traj.times[k] - 1.0).margin(p.config.tau + h2 + 1e-6));
  }
}

TEST_CASE("T below tau yields the initial state only") {
  ExperimentPreset p = make_preset("dirac_to_dirac", 32);
  p.config.T = 1e-5;
  const Trajectory traj = run_flow(p.config);
  CHECK(traj.total_steps == 0);
  REQUIRE(traj.states.size() == 1);
  CHECK(sup_distance(traj.states[0], p.config.initial) == 0.0);
}

TEST_CASE("detect_free_boundary") {
  const Grid grid = build_grid(100);
  CHECK(detect_free_boundary(sample_quantile(grid, [](double) { return -1.0; })) == 1.0);

  const auto g = sample_quantile(grid, [](double s) { return std::min(s - 0.6, 0.0); });
  CHECK(detect_free_boundary(g) == Catch::Approx(0.6).margin(1.5 * grid.h));

  QuantileVector bad(build_grid(2), {1.0, 0.0});
  CHECK_THROWS_AS(detect_free_boundary(bad), std::invalid_argument);
}

TEST_CASE("unregularized support grows monotonically (dissipation of mass)") {
  ExperimentPreset p = make_preset("dirac_to_dirac", 200);
  p.config.lambda = 0.0;
  p.config.T = 1.0;
  p.config.output_stride = 100;
  const Trajectory traj = run_flow(p.config);
  // support upper edge g(t, s_max) is nondecreasing across checkpoints, and
  // the left tail never fully detaches from -1 + 2ts territory
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const auto& prev = traj.states[k - 1];
    const auto& cur = traj.states[k];
    CHECK(cur[cur.size() - 1] >= prev[prev.size() - 1] - 1e-12);
    CHECK(cur[0] >= prev[0] - 1e-12);
  }
  // closed form: g(t,s) = min(-1 + 2ts, 0)
  const auto& fin = traj.final_state();
  for (std::size_t i = 0; i < fin.size(); ++i) {
    const double s = fin.grid.node(i);
    const double want = std::min(-1.0 + 2.0 * 1.0 * s, 0.0);
    CHECK(fin[i] == Catch::Approx(want).margin(2.0 * p.config.tau + 1e-6));
  }
}

TEST_CASE("lambda down to zero error is nonincreasing (small study)") {
  ExperimentPreset p = make_preset("uniform_to_uniform", 64);
  p.config.T = 0.1;
  p.config.output_stride = 5;
  const auto table = oracles::lambda_convergence_study(p.config, {1e-1, 1e-2, 1e-3});
  REQUIRE(table.size() == 3);
  CHECK(table[0].sup_error > table[1].sup_error);
  CHECK(table[1].sup_error > table[2].sup_error);
}
