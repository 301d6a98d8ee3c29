#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "mirrorflow/experiment.hpp"

namespace mirrorflow::cli {

using nlohmann::json;

inline constexpr const char* kCsvHeader = "t,gap,lagrangian_gap,feasibility,lyapunov,mu,x_norm,lambda_norm";
inline constexpr const char* kSummarySchema = "mirrorflow.summary/1";

// %.17g round trips doubles, so equal runs give equal bytes.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trajectory_csv(const std::filesystem::path& path, const RunReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << kCsvHeader << "\r\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out << csv_number(r.times[k]) << ',' << csv_number(r.primal_gap[k]) << ',' << csv_number(r.lagrangian_gap[k])
        << ',' << csv_number(r.feasibility[k]) << ',' << csv_number(r.lyapunov[k]) << ',' << csv_number(r.mu[k])
        << ',' << csv_number(r.x_norm[k]) << ',' << csv_number(r.lambda_norm[k]) << "\r\n";
  }
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json summary_json(const ExperimentResult& r) {
  const auto& c = r.config;
  const auto& b = r.check;
  json j;
  j["schema"] = kSummarySchema;
  j["problem"] = r.problem;
  j["family"] = to_string(r.family);
  j["system"] = to_string(c.system);
  j["parameters"] = {{"alpha", c.alpha},
                     {"beta", (c.system == SystemKind::ADMD || c.system == SystemKind::SADMD) ? 1.0 : c.beta},
                     {"t0", c.t0},
                     {"tf", c.tf},
                     {"mu0", c.mu0 ? json(*c.mu0) : json(nullptr)},
                     {"seed", c.seed ? json(*c.seed) : json(nullptr)}};
  j["integrator"] = {{"rel_tol", c.integrator.rel_tol},
                     {"abs_tol", c.integrator.abs_tol},
                     {"points_per_decade", c.integrator.points_per_decade},
                     {"accepted_steps", r.trajectory.accepted},
                     {"rejected_steps", r.trajectory.rejected},
                     {"evaluations", r.trajectory.evaluations},
                     {"status", to_string(r.trajectory.status)},
                     {"message", r.trajectory.message}};
  j["samples"] = r.report.times.size();
  j["reference"] = {{"f_star", r.reference.f},
                    {"kkt_residual", r.reference.kkt_residual},
                    {"method", r.reference.method}};
  j["v0"] = finite_or_null(r.report.v0);
  j["anchored_mirror_term"] = r.report.anchored_mirror_term;
  j["fitted_slope"] = {{"gap", r.gap_fit ? json(r.gap_fit->slope) : json(nullptr)},
                       {"feasibility", r.feasibility_fit ? json(r.feasibility_fit->slope) : json(nullptr)}};
  j["bounds"] = {{"slack", b.slack},
                 {"passed", b.passed()},
                 {"gap_ratio_max", finite_or_null(b.gap_ratio_max)},
                 {"gap_ok", b.gap_ok},
                 {"feasibility_ratio_max", finite_or_null(b.feasibility_ratio_max)},
                 {"feasibility_ok", b.feasibility_ok},
                 {"final_feasibility_ratio", finite_or_null(b.final_feasibility_ratio)},
                 {"lyapunov_max_increase", finite_or_null(b.lyapunov_max_increase)},
                 {"lyapunov_ok", b.lyapunov_ok},
                 {"saddle_min", finite_or_null(b.saddle_min)},
                 {"saddle_ok", b.saddle_ok},
                 {"informational",
                  {{"residual_direction_ratio_max", finite_or_null(b.residual_direction_ratio_max)},
                   {"lower_bound_ratio_max", finite_or_null(b.lower_bound_ratio_max)},
                   {"integral_growth_last_decade", finite_or_null(b.integral_growth_last_decade)}}}};
  j["feasibility_max_violation"] = b.membership_max;
  if (r.recovered)
    j["recovery"] = {{"support_match", r.recovered->support_match},
                     {"off_support_mass", r.recovered->off_support_mass},
                     {"max_error", r.recovered->max_error}};
  else
    j["recovery"] = nullptr;
  j["runtime_seconds"] = r.runtime_seconds;
  j["warnings"] = r.warnings;
  return j;
}

inline void write_summary(const std::filesystem::path& path, const ExperimentResult& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << summary_json(r).dump(2) << "\n";
}

// gnuplot script for the log-log panels, reading trajectory.csv next to it.
inline std::string plot_script(const ExperimentResult& r) {
  const double a2v0 = r.config.alpha * r.config.alpha * r.report.v0;
  std::string s;
  s += "# " + r.problem + ", " + to_string(r.config.system) + ", alpha = " + csv_number(r.config.alpha) + "\n";
  s += "set datafile separator ','\n";
  s += "set terminal pngcairo size 1500,450\n";
  s += "set output 'figure.png'\n";
  s += "set logscale xy\n";
  s += "set format y '10^{%L}'\n";
  s += "set xlabel 't'\n";
  s += "set key bottom left\n";
  s += "bound(x) = " + csv_number(a2v0) + " / x**2\n";
  s += "set multiplot layout 1,3\n";
  s += "set title '|f(x(t)) - f*|'\n";
  s += "plot 'trajectory.csv' using 1:2 with lines title 'gap'\n";
  s += "set title 'Lagrangian gap'\n";
  s += "plot 'trajectory.csv' using 1:(abs($3)) with lines title 'gap', bound(x) with lines dt 2 "
       "title 'alpha^2 V0 / t^2'\n";
  s += "set title 'feasibility'\n";
  s += "plot 'trajectory.csv' using 1:4 with lines title 'feasibility'\n";
  s += "unset multiplot\n";
  return s;
}

inline void write_plot_script(const std::filesystem::path& path, const ExperimentResult& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << plot_script(r);
}

inline void write_artifacts(const std::filesystem::path& dir, const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  write_trajectory_csv(dir / "trajectory.csv", r.report);
  write_summary(dir / "summary.json", r);
  write_plot_script(dir / "plot.gp", r);
}

}  // namespace mirrorflow::cli
