#include "rmil/run.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "rmil/metrics.hpp"
#include "rmil/model.hpp"
#include "rmil/noise.hpp"
#include "rmil/study.hpp"

namespace rmil {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string study_csv(const StudyReport& report) {
  std::string csv = "level,error,std_error,M,slope,slope_lo,slope_hi\n";
  for (const auto& lv : report.levels) {
    csv += fmt(lv.scale) + "," + fmt(lv.error) + "," + fmt(lv.std_error) + "," +
           std::to_string(lv.replicates) + "," + fmt(report.fit.slope) + "," +
           fmt(report.slope_lo) + "," + fmt(report.slope_hi) + "\n";
  }
  return csv;
}

std::string trajectory_csv(const Trajectory& traj, int d) {
  std::string csv = "t,i";
  for (int c = 1; c <= d; ++c) csv += ",x_" + std::to_string(c);
  csv += "\n";
  for (std::size_t j = 0; j < traj.frames.size(); ++j) {
    const Eigen::MatrixXd& frame = traj.frames[j];
    for (Eigen::Index i = 0; i < frame.rows(); ++i) {
      csv += fmt(traj.grid.time(static_cast<int>(j))) + "," + std::to_string(i);
      for (int c = 0; c < d; ++c) csv += "," + fmt(frame(i, c));
      csv += "\n";
    }
  }
  return csv;
}

json report_json(const StudyReport& report) {
  json levels = json::array();
  for (const auto& lv : report.levels)
    levels.push_back({{"scale", lv.scale},
                      {"error", lv.error},
                      {"std_error", lv.std_error},
                      {"M", lv.replicates}});
  json fit = {{"valid", report.fit.valid},
              {"slope", report.fit.slope},
              {"residual", report.fit.residual},
              {"pair_orders", report.fit.pair_orders},
              {"warning", report.fit.warning}};
  return {{"kind", report.kind},
          {"levels", levels},
          {"fit", fit},
          {"slope_lo", report.slope_lo},
          {"slope_hi", report.slope_hi},
          {"monotone_decreasing", report.monotone_decreasing},
          {"max_rel_spread", report.max_rel_spread},
          {"stable", report.stable},
          {"any_divergence", report.any_divergence},
          {"diverged_replicates", report.diverged_replicates}};
}

struct CheckOutcome {
  bool evaluated = false;
  bool passed = true;
  std::string detail;
};

CheckOutcome evaluate_check(const std::string& sub, const RunConfig& cfg, const StudyReport& report,
                            bool diverged) {
  CheckOutcome outcome;
  outcome.evaluated = true;
  if (sub == "simulate") {
    outcome.passed = !diverged;
    outcome.detail = diverged ? "simulation diverged" : "finite trajectory";
    return outcome;
  }
  if (sub == "poc") {
    outcome.passed = report.monotone_decreasing && !report.any_divergence;
    outcome.detail = report.monotone_decreasing ? "mean W2 strictly decreasing in N"
                                                : "mean W2 not strictly decreasing in N";
    return outcome;
  }
  if (sub == "moments") {
    outcome.passed = report.stable;
    outcome.detail = "max relative spread " + fmt(report.max_rel_spread) +
                     (report.any_divergence ? ", divergence detected" : "");
    return outcome;
  }
  // slope-window studies
  outcome.passed = report.fit.valid && report.fit.slope >= cfg.check_slope_min &&
                   report.fit.slope <= cfg.check_slope_max && !report.any_divergence;
  outcome.detail = "slope " + fmt(report.fit.slope) + " window [" + fmt(cfg.check_slope_min) +
                   ", " + fmt(cfg.check_slope_max) + "]";
  return outcome;
}

}  // namespace

int run_subcommand(const std::string& subcommand, const RunConfig& cfg, bool check) {
  const auto sub_errors = validate_for(cfg, subcommand);
  if (!sub_errors.empty()) {
    for (const auto& e : sub_errors) std::cerr << "config error: " << e << "\n";
    return kExitConfigError;
  }

  const std::filesystem::path out_dir(cfg.out);
  std::filesystem::create_directories(out_dir);

  StudyOptions opts;
  opts.q = cfg.q;
  opts.p = cfg.p;
  opts.K = cfg.K;
  opts.x0 = cfg.x0;
  opts.x0_std = cfg.x0_std;
  opts.workers = cfg.workers;
  opts.mode = cfg.mode;

  json manifest;
  manifest["schema_version"] = 1;
  manifest["subcommand"] = subcommand;
  manifest["seed"] = cfg.seed;
  manifest["workers"] = cfg.workers;
  manifest["config_text"] = serialize_config(cfg);

  StudyReport report;
  bool diverged = false;
  std::string csv_name;
  std::string csv;

  try {
    if (subcommand == "simulate") {
      const ModelSpec model = builtin_model(cfg.model, cfg.model_params);
      const TimeGrid grid = TimeGrid::uniform(cfg.T, cfg.n);
      const int K = cfg.K > 0 ? cfg.K : default_substeps(grid.h_max());
      const NoiseBundle bundle = sample_noise(grid, cfg.N, model.m1, model.m0, K, cfg.seed, 0);
      const Eigen::MatrixXd initial =
          gaussian_initial_ensemble(cfg.N, model.d, cfg.x0, cfg.x0_std, cfg.seed, 0);
      const Trajectory traj =
          simulate(model, bundle, initial, cfg.scheme, cfg.mode, cfg.workers);
      diverged = traj.diverged;
      csv_name = "trajectory.csv";
      csv = trajectory_csv(traj, model.d);
      manifest["results"] = {{"diverged", traj.diverged}, {"diverged_step", traj.diverged_step}};
    } else {
      if (subcommand == "quadrature") {
        report = quadrature_study(cfg.integrand, cfg.T, cfg.h_levels, cfg.M, cfg.seed, opts);
      } else {
        const ModelSpec model = builtin_model(cfg.model, cfg.model_params);
        if (subcommand == "convergence") {
          report = strong_convergence_study(model, cfg.T, cfg.N, cfg.h_levels, cfg.h_ref, cfg.M,
                                            cfg.scheme, cfg.seed, opts);
        } else if (subcommand == "consistency") {
          report = consistency_study(model, cfg.T, cfg.N, cfg.h_levels, cfg.h_ref, cfg.M, cfg.seed,
                                     opts);
        } else if (subcommand == "poc") {
          report = poc_study(model, cfg.T, cfg.h_levels.front(), cfg.N_levels, cfg.N_ref, cfg.M,
                             cfg.seed, opts);
        } else if (subcommand == "moments") {
          report = moment_stability_check(model, cfg.T, cfg.N, cfg.h_levels, cfg.M, cfg.p,
                                          cfg.seed, opts);
        }
      }
      diverged = report.any_divergence;
      csv_name = subcommand + ".csv";
      csv = study_csv(report);
      manifest["results"] = report_json(report);
      manifest["wall_seconds"] = report.wall_seconds;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  write_file(out_dir / csv_name, csv);
  manifest["outputs"] = {csv_name};

  int exit_code = kExitOk;
  if (check) {
    const CheckOutcome outcome = evaluate_check(subcommand, cfg, report, diverged);
    manifest["check"] = {{"enabled", true}, {"passed", outcome.passed}, {"detail", outcome.detail}};
    if (!outcome.passed) exit_code = kExitCheckFailed;
  }
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return exit_code;
}

}  // namespace rmil
