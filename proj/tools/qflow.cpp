#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qflow/io.hpp"
#include "qflow/oracles.hpp"
#include "qflow/presets.hpp"

namespace {

struct CommonOpts {
  std::string preset;
  std::string config_path;
  double tau = -1.0;
  double lambda = -1.0;
  std::size_t grid = 0;
  double horizon = -1.0;
  std::string out = "out";
  std::string format = "csv_long";
};

void add_common(CLI::App* cmd, CommonOpts& o, bool need_source) {
  auto* preset = cmd->add_option("--preset", o.preset, "experiment preset name");
  auto* config = cmd->add_option("--config", o.config_path, "JSON config file");
  if (need_source) {
    preset->excludes(config);
    config->excludes(preset);
  }
  cmd->add_option("--tau", o.tau, "time step override");
  cmd->add_option("--lambda", o.lambda, "regularization override");
  cmd->add_option("--grid", o.grid, "grid size override");
  cmd->add_option("--horizon", o.horizon, "time horizon override");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--format", o.format, "trajectory format: csv_long | json")
      ->check(CLI::IsMember({"csv_long", "csv", "json"}));
}

qflow::ExperimentPreset resolve(const CommonOpts& o, const std::string& fallback_preset) {
  qflow::ExperimentPreset preset = [&]() -> qflow::ExperimentPreset {
    if (!o.config_path.empty()) {
      if (o.grid) throw std::invalid_argument("--grid cannot override a file config");
      return {"config:" + o.config_path, qflow::load_config(o.config_path), {}};
    }
    const std::string name = o.preset.empty() ? fallback_preset : o.preset;
    if (name.empty()) throw std::invalid_argument("specify --preset or --config");
    return qflow::make_preset(name, o.grid);
  }();
  if (o.tau > 0.0) preset.config.tau = o.tau;
  if (o.lambda >= 0.0) preset.config.lambda = o.lambda;
  if (o.horizon >= 0.0) preset.config.T = o.horizon;
  preset.config.validate();
  return preset;
}

std::size_t max_threads() {
  if (const char* env = std::getenv("QF_MAX_THREADS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

int cmd_run(const CommonOpts& o) {
  const qflow::ExperimentPreset preset = resolve(o, "");
  const qflow::RunManifest manifest =
      qflow::run_experiment(preset.config, o.out, qflow::parse_format(o.format));
  std::cout << "run " << preset.name << " -> " << o.out << " (id " << manifest.run_id << ", "
            << manifest.wall_time_seconds << " s)\n";
  for (const auto& f : manifest.output_files) std::cout << "  " << f << '\n';
  return 0;
}

int cmd_sweep(const CommonOpts& o) {
  qflow::ExperimentPreset preset = resolve(o, "lambda_sweep");
  std::vector<double> lambdas = preset.sweep_lambdas;
  if (lambdas.empty()) lambdas = {1e-1, 1e-2, 1e-3, 1e-4};

  std::filesystem::create_directories(o.out);

  // reference: the unregularized flow of the same configuration
  qflow::FlowConfig ref_cfg = preset.config;
  ref_cfg.lambda = 0.0;
  const qflow::Trajectory ref = qflow::run_flow(ref_cfg);

  std::vector<qflow::Trajectory> runs(lambdas.size());
  std::vector<std::string> errors(lambdas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < lambdas.size(); i = next.fetch_add(1)) {
      try {
        qflow::FlowConfig cfg = preset.config;
        cfg.lambda = lambdas[i];
        runs[i] = qflow::run_flow(cfg);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n_threads = std::min(max_threads(), lambdas.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < lambdas.size(); ++i)
    if (!errors[i].empty()) {
      std::cerr << "sweep: lambda=" << lambdas[i] << " failed: " << errors[i] << '\n';
      return 1;
    }

  const auto table_path = std::filesystem::path(o.out) / "lambda_errors.csv";
  std::ofstream table(table_path, std::ios::binary);
  table << "lambda,sup_error\n";
  const qflow::ExportFormat fmt = qflow::parse_format(o.format);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    double sup = 0.0;
    for (std::size_t k = 0; k < runs[i].states.size(); ++k)
      sup = std::max(sup, qflow::wasserstein2(runs[i].states[k], ref.states[k]));
    table << qflow::detail_io::fmt(lambdas[i]) << ',' << qflow::detail_io::fmt(sup) << '\n';

    char name[64];
    std::snprintf(name, sizeof(name), "lambda_%g", lambdas[i]);
    const auto p = std::filesystem::path(o.out) /
                   (std::string(name) + (fmt == qflow::ExportFormat::json ? ".json" : ".csv"));
    if (fmt == qflow::ExportFormat::json)
      qflow::export_trajectory_json(runs[i], p);
    else
      qflow::export_trajectory_csv(runs[i], p);
    std::cout << "sweep lambda=" << lambdas[i] << " sup_error=" << sup << " -> " << p.string()
              << '\n';
  }
  std::cout << "error table -> " << table_path.string() << '\n';
  return 0;
}

int cmd_oracle_check(const CommonOpts& o) {
  using namespace qflow;
  int failures = 0;
  auto check = [&](const std::string& name, double got, double expected, double tol) {
    const bool ok = std::abs(got - expected) <= tol;
    if (!ok) ++failures;
    std::cout << (ok ? "ok   " : "FAIL ") << name << ": got " << got << ", expected " << expected
              << " (tol " << tol << ")\n";
  };

  const double lam = (o.lambda >= 0.0) ? o.lambda : 1e-2;

  // closed-form series vs a crude two-mode partial sum at small t
  const oracles::FourierParams fp = oracles::FourierParams::for_tolerance(lam);
  std::cout << "fourier modes: " << fp.n_max << " (tail bound " << fp.tail_bound() << ")\n";
  check("heat_fourier(0, s=0.3)", oracles::heat_fourier(0.0, 0.3, fp), -1.0, 1e-12);

  const double t_star = oracles::touch_time(lam);
  std::cout << "touch_time(lambda=" << lam << ") = " << t_star << '\n';
  check("touch_time below horizon", t_star < 1.0 ? 1.0 : 0.0, 1.0, 0.0);

  check("dirac_away_flow(0.5)", oracles::dirac_away_flow(0.5), -1.5, 1e-15);

  const std::vector<WeightedAtom> mu{{-1.0, 1.0}}, nu{{0.0, 1.0}};
  check("mmd_squared_bruteforce(delta_{-1}, delta_0)",
        oracles::mmd_squared_bruteforce(mu, nu), 1.0, 1e-15);

  const Grid grid = build_grid(64);
  const QuantileVector u = sample_quantile(grid, [](double) { return -1.0; });
  check("mmd_squared grid vs bruteforce", mmd_squared(u, TargetMeasure::dirac(0.0)), 1.0, 1e-12);

  std::cout << (failures ? "oracle-check: FAILURES\n" : "oracle-check: all ok\n");
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein gradient flows of distance-kernel MMD energies in 1-D"};
  app.require_subcommand(1);

  CommonOpts run_opts, sweep_opts, oracle_opts;
  CLI::App* run = app.add_subcommand("run", "run one flow experiment and export its outputs");
  add_common(run, run_opts, true);
  CLI::App* sweep =
      app.add_subcommand("sweep", "run the lambda sweep against the unregularized reference");
  add_common(sweep, sweep_opts, false);
  CLI::App* oracle = app.add_subcommand("oracle-check", "evaluate the closed-form oracles");
  add_common(oracle, oracle_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts);
    if (oracle->parsed()) return cmd_oracle_check(oracle_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
