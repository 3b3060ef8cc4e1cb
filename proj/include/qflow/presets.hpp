#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "qflow/flow.hpp"
#include "qflow/grid.hpp"
#include "qflow/target.hpp"

namespace qflow {

/// Named experiment configurations mirroring the figure setups:
/// Dirac-to-Dirac, Dirac-away (repulsive), Uniform-to-Uniform, the cut-off
/// Gaussian pair, and the lambda sweep over the uniform pair.
struct ExperimentPreset {
  std::string name;
  FlowConfig config;
  std::vector<double> sweep_lambdas;  // nonempty only for lambda_sweep
};

inline ExperimentPreset make_preset(const std::string& name, std::size_t M_override = 0) {
  auto grid_of = [&](std::size_t M_default) {
    return build_grid(M_override ? M_override : M_default);
  };

  if (name == "dirac_to_dirac") {
    const Grid grid = grid_of(400);
    FlowConfig cfg{1e-3, 1e-2, grid.M, 1.0, KernelSign::negative, TargetMeasure::dirac(0.0),
                   sample_quantile(grid, [](double) { return -1.0; })};
    return {name, std::move(cfg), {}};
  }
  if (name == "dirac_away") {
    const Grid grid = grid_of(256);
    FlowConfig cfg{1e-3, 1e-2, grid.M, 1.0, KernelSign::positive, TargetMeasure::dirac(0.0),
                   sample_quantile(grid, [](double) { return -1.0; })};
    return {name, std::move(cfg), {}};
  }
  if (name == "uniform_to_uniform") {
    const Grid grid = grid_of(256);
    FlowConfig cfg{2e-3, 1e-2, grid.M, 1.0, KernelSign::negative,
                   TargetMeasure::uniform(0.0, 1.0),
                   sample_quantile(grid, [](double s) { return 2.0 * s - 3.0; })};
    return {name, std::move(cfg), {}};
  }
  if (name == "gaussian_like") {
    const Grid grid = grid_of(256);
    const double a = 1.0 / 1001.0, b = 1000.0 / 1001.0;
    const TargetMeasure target = TargetMeasure::truncated_gaussian(-5.0, 1.0, a, b);
    const TargetMeasure init_measure = TargetMeasure::truncated_gaussian(5.0, 1.0, a, b);
    FlowConfig cfg{1e-2, 1e-2, grid.M, 1.0, KernelSign::negative, target,
                   sample_target_quantile(init_measure, grid)};
    return {name, std::move(cfg), {}};
  }
  if (name == "lambda_sweep") {
    ExperimentPreset base = make_preset("uniform_to_uniform", M_override);
    base.name = name;
    base.config.T = 0.5;
    base.sweep_lambdas = {1e-1, 1e-2, 1e-3, 1e-4};
    return base;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

inline std::vector<std::string> preset_names() {
  return {"dirac_to_dirac", "dirac_away", "uniform_to_uniform", "gaussian_like", "lambda_sweep"};
}

}  // namespace qflow
