#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflow/density.hpp"
#include "qflow/flow.hpp"
#include "qflow/flow_positive.hpp"
#include "qflow/presets.hpp"
#include "qflow/target.hpp"

namespace qflow {

enum class ExportFormat { csv_long, json };

inline ExportFormat parse_format(const std::string& s) {
  if (s == "csv_long" || s == "csv") return ExportFormat::csv_long;
  if (s == "json") return ExportFormat::json;
  throw std::invalid_argument("unknown export format: " + s);
}

namespace detail_io {

/// Shortest round-trip decimal rendering, deterministic across runs.
inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail_io

inline nlohmann::json target_to_json(const TargetMeasure& t) {
  using namespace target_variant;
  nlohmann::json j;
  if (auto* d = std::get_if<Dirac>(&t.variant())) {
    j = {{"kind", "dirac"}, {"x0", d->x0}};
  } else if (auto* u = std::get_if<Uniform>(&t.variant())) {
    j = {{"kind", "uniform"}, {"a", u->a}, {"b", u->b}};
  } else if (auto* g = std::get_if<TruncatedGaussianQuantile>(&t.variant())) {
    j = {{"kind", "truncated_gaussian"}, {"mean", g->mean},   {"stdev", g->stdev},
         {"cut_lo", g->cut_lo},          {"cut_hi", g->cut_hi}};
  } else if (auto* e = std::get_if<Empirical>(&t.variant())) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : e->atoms) atoms.push_back({{"x", a.location}, {"w", a.weight}});
    j = {{"kind", "empirical"}, {"atoms", atoms}};
  } else if (auto* s = std::get_if<GridSampled>(&t.variant())) {
    j = {{"kind", "grid_sampled"}, {"M", s->quantile.size()}, {"values", s->quantile.values}};
  }
  return j;
}

inline TargetMeasure target_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind");
  if (kind == "dirac") return TargetMeasure::dirac(j.at("x0"));
  if (kind == "uniform") return TargetMeasure::uniform(j.at("a"), j.at("b"));
  if (kind == "truncated_gaussian")
    return TargetMeasure::truncated_gaussian(j.at("mean"), j.at("stdev"), j.at("cut_lo"),
                                             j.at("cut_hi"));
  if (kind == "empirical") {
    std::vector<WeightedAtom> atoms;
    for (const auto& a : j.at("atoms")) atoms.push_back({a.at("x"), a.at("w")});
    return TargetMeasure::empirical(std::move(atoms));
  }
  if (kind == "grid_sampled") {
    const std::size_t M = j.at("M");
    std::vector<double> values = j.at("values");
    return TargetMeasure::grid_sampled(QuantileVector(build_grid(M), std::move(values)));
  }
  throw std::invalid_argument("target_from_json: unknown kind " + kind);
}

inline nlohmann::json config_to_json(const FlowConfig& cfg) {
  return {{"tau", cfg.tau},
          {"lambda", cfg.lambda},
          {"M", cfg.M},
          {"T", cfg.T},
          {"kernel_sign", cfg.kernel_sign == KernelSign::negative ? "negative" : "positive"},
          {"target", target_to_json(cfg.target)},
          {"initial", cfg.initial.values},
          {"solver_tol", cfg.solver_tol},
          {"max_iter", cfg.max_iter},
          {"output_stride", cfg.output_stride}};
}

inline FlowConfig config_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("config field '" + field + "': " + why);
  };
  const std::size_t M = j.at("M");
  if (M < 2) fail("M", "must be >= 2");
  std::vector<double> init = j.at("initial");
  if (init.size() != M) fail("initial", "length must equal M");
  const std::string sign = j.value("kernel_sign", "negative");
  if (sign != "negative" && sign != "positive") fail("kernel_sign", "must be negative|positive");
  FlowConfig cfg{j.at("tau"),
                 j.at("lambda"),
                 M,
                 j.at("T"),
                 sign == "negative" ? KernelSign::negative : KernelSign::positive,
                 target_from_json(j.at("target")),
                 QuantileVector(build_grid(M), std::move(init)),
                 j.value("solver_tol", 1e-10),
                 j.value("max_iter", kProxMaxIterDefault),
                 j.value("output_stride", std::size_t{1})};
  cfg.validate();
  return cfg;
}

/// Reads a FlowConfig from a JSON file; schema errors name the field.
inline FlowConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

inline void export_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  if (traj.states.empty()) throw std::invalid_argument("export_trajectory: empty trajectory");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_trajectory: cannot write " + path.string());
  out << "t,s,g,g_slope\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const QuantileVector& g = traj.states[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      out << detail_io::fmt(traj.times[k]) << ',' << detail_io::fmt(g.grid.node(i)) << ','
          << detail_io::fmt(g[i]) << ',' << detail_io::fmt(traj.slopes[k][i]) << '\n';
    }
  }
  if (!out) throw std::runtime_error("export_trajectory: write failed for " + path.string());
}

inline void export_trajectory_json(const Trajectory& traj, const std::filesystem::path& path,
                                   const nlohmann::json& config_echo = {}) {
  if (traj.states.empty()) throw std::invalid_argument("export_trajectory: empty trajectory");
  nlohmann::json j;
  j["config"] = config_echo;
  j["times"] = traj.times;
  j["s"] = traj.states.front().grid.nodes();
  nlohmann::json states = nlohmann::json::array(), slopes = nlohmann::json::array();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    states.push_back(traj.states[k].values);
    slopes.push_back(traj.slopes[k]);
  }
  j["states"] = states;
  j["slopes"] = slopes;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_trajectory: cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("export_trajectory: write failed for " + path.string());
}

struct ImportedTrajectory {
  std::vector<double> times;
  std::vector<double> s;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> slopes;
  nlohmann::json config;
};

inline ImportedTrajectory import_trajectory_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_trajectory_json: cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  ImportedTrajectory t;
  t.times = j.at("times").get<std::vector<double>>();
  t.s = j.at("s").get<std::vector<double>>();
  t.states = j.at("states").get<std::vector<std::vector<double>>>();
  t.slopes = j.at("slopes").get<std::vector<std::vector<double>>>();
  t.config = j.value("config", nlohmann::json{});
  return t;
}

inline void export_density_csv(const DensityProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_density: cannot write " + path.string());
  out << "kind,x,value\n";
  for (const auto& a : profile.atoms)
    out << "atom," << detail_io::fmt(a.location) << ',' << detail_io::fmt(a.mass) << '\n';
  for (const auto& d : profile.density_samples)
    out << "density," << detail_io::fmt(d.x) << ',' << detail_io::fmt(d.f) << '\n';
}

struct RunManifest {
  std::string run_id;
  nlohmann::json config_echo;
  double wall_time_seconds = 0.0;
  std::vector<std::string> output_files;
  bool cone_invariance_ok = false;
  bool energy_decay_ok = false;
  std::string flow_condition;  // holds | fails | unknown
  std::size_t projected_steps = 0;
  bool solver_ok = false;
  nlohmann::json oracle_comparison;  // present for the Dirac-to-Dirac setup

  nlohmann::json to_json() const {
    return {{"run_id", run_id},
            {"config", config_echo},
            {"wall_time_seconds", wall_time_seconds},
            {"output_files", output_files},
            {"invariants",
             {{"cone_invariance", cone_invariance_ok ? "pass" : "fail"},
              {"energy_decay", energy_decay_ok ? "pass" : "fail"},
              {"flow_condition", flow_condition},
              {"projected_steps", projected_steps},
              {"solver", solver_ok ? "pass" : "fail"}}},
            {"oracle_comparison", oracle_comparison}};
  }
};

namespace detail_io {

inline std::string run_id_for(const nlohmann::json& config_echo) {
  const std::size_t h = std::hash<std::string>{}(config_echo.dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016zx", h);
  return buf;
}

}  // namespace detail_io

/// Runs the configured flow and writes trajectory, six checkpoint density
/// profiles, an energy log, and a manifest into out_dir.
inline RunManifest run_experiment(const FlowConfig& cfg, const std::filesystem::path& out_dir,
                                  ExportFormat format = ExportFormat::csv_long) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw std::runtime_error("run_experiment: invalid output directory " + out_dir.string());
  {  // probe writability before any computation
    const auto probe = out_dir / ".write_probe";
    std::ofstream p(probe);
    if (!p) throw std::runtime_error("run_experiment: output directory not writable");
    p.close();
    std::filesystem::remove(probe);
  }

  const auto t0 = std::chrono::steady_clock::now();
  const Trajectory traj = (cfg.kernel_sign == KernelSign::negative) ? run_flow(cfg)
                                                                    : run_flow_positive(cfg);

  RunManifest manifest;
  manifest.config_echo = config_to_json(cfg);
  manifest.run_id = detail_io::run_id_for(manifest.config_echo);
  manifest.solver_ok = !traj.aborted;
  manifest.cone_invariance_ok = traj.worst_cone_defect <= kMonotoneTol;
  manifest.energy_decay_ok = traj.worst_energy_decay_violation <= 10.0 * cfg.solver_tol;
  manifest.projected_steps = traj.projected_steps;
  switch (traj.condition.status) {
    case FlowConditionStatus::holds: manifest.flow_condition = "holds"; break;
    case FlowConditionStatus::fails: manifest.flow_condition = "fails"; break;
    default: manifest.flow_condition = "unknown"; break;
  }

  auto emit = [&](const std::filesystem::path& p) { manifest.output_files.push_back(p.string()); };

  const auto traj_path =
      out_dir / (format == ExportFormat::csv_long ? "trajectory.csv" : "trajectory.json");
  if (format == ExportFormat::csv_long)
    export_trajectory_csv(traj, traj_path);
  else
    export_trajectory_json(traj, traj_path, manifest.config_echo);
  emit(traj_path);

  // six checkpoints, evenly spaced over the stored states
  const std::size_t n_checkpoints = std::min<std::size_t>(6, traj.states.size());
  const double anchor = cfg.target.quantile(0.5);
  for (std::size_t c = 0; c < n_checkpoints; ++c) {
    const std::size_t k = (n_checkpoints == 1)
                              ? 0
                              : c * (traj.states.size() - 1) / (n_checkpoints - 1);
    const DensityProfile profile =
        density_from_quantile(traj.states[k], traj.slopes[k], kAtomTolDefault, anchor);
    char name[64];
    std::snprintf(name, sizeof(name), "density_%02zu.csv", c);
    const auto p = out_dir / name;
    export_density_csv(profile, p);
    emit(p);
  }

  {
    const auto p = out_dir / "energy.csv";
    std::ofstream out(p, std::ios::binary);
    out << "t,energy\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k)
      out << detail_io::fmt(traj.times[k]) << ',' << detail_io::fmt(traj.energies[k]) << '\n';
    emit(p);
  }

  manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    const auto p = out_dir / "manifest.json";
    std::ofstream out(p, std::ios::binary);
    out << manifest.to_json().dump(2) << '\n';
    emit(p);
  }

  if (traj.aborted)
    throw std::runtime_error("run_experiment: solver failure recorded in manifest: " +
                             traj.abort_reason);
  return manifest;
}

}  // namespace qflow
