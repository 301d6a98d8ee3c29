#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "mirrorflow/acceptance.hpp"
#include "report.hpp"

namespace fs = std::filesystem;
using namespace mirrorflow;

namespace {

constexpr int kUsageError = 2;
constexpr int kRunFailed = 3;

std::string alpha_dir(double a) {
  std::ostringstream s;
  s << "alpha_" << a;
  return s.str();
}

int cmd_run(const std::string& config_path, cli::Overrides o, const std::vector<double>& alphas) {
  cli::json file = cli::json::object();
  if (!config_path.empty()) file = cli::read_json_file(config_path);

  std::vector<ExperimentConfig> configs;
  std::vector<fs::path> dirs;
  std::string out;
  if (alphas.size() <= 1) {
    if (!alphas.empty()) o.alpha = alphas[0];
    auto loaded = cli::resolve_config(file, o);
    configs.push_back(loaded.experiment);
    dirs.push_back(loaded.out);
  } else {
    for (double a : alphas) {
      o.alpha = a;
      auto loaded = cli::resolve_config(file, o);
      configs.push_back(loaded.experiment);
      dirs.push_back(fs::path(loaded.out) / alpha_dir(a));
    }
  }

  const auto results = run_sweep(configs);
  int status = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    cli::write_artifacts(dirs[i], r);
    std::printf("%s %s alpha=%g: %s, gap ratio %.3g, feasibility ratio %.3g, bounds %s, %.2f s -> %s\n",
                r.problem.c_str(), to_string(r.config.system), r.config.alpha, to_string(r.trajectory.status),
                r.check.gap_ratio_max, r.check.feasibility_ratio_max, r.check.passed() ? "hold" : "violated",
                r.runtime_seconds, dirs[i].string().c_str());
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (!r.ok()) status = kRunFailed;
  }
  return status;
}

int cmd_verify(double slack, const std::vector<int>& only) {
  acceptance::Options opt;
  opt.slack = slack;
  opt.only.insert(only.begin(), only.end());
  const auto rs = acceptance::run(opt, [](const acceptance::CriterionResult& r) {
    std::printf("%s\n", acceptance::format(r).c_str());
    std::fflush(stdout);
  });
  std::size_t passed = 0;
  for (const auto& r : rs) passed += r.passed;
  std::printf("%zu of %zu checks passed\n", passed, rs.size());
  return acceptance::all_passed(rs) ? 0 : 1;
}

int cmd_list(const std::string& filter) {
  for (const auto& line : list_catalogue(filter)) std::printf("%s\n", line.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mirrorflow: accelerated primal-dual mirror dynamics"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "integrate one problem and write trajectory.csv, summary.json, plot.gp");
  std::string config_path;
  cli::Overrides o;
  std::vector<double> alphas;
  std::string problem, system, out;
  double beta = 0, t0 = 0, tf = 0, mu0 = 0, rel_tol = 0, abs_tol = 0;
  std::uint64_t seed = 0;
  int ppd = 0;
  run->add_option("--config", config_path, "JSON config file");
  auto* o_problem = run->add_option("--problem", problem, "catalogue problem name");
  auto* o_system = run->add_option("--system", system, "apdmd|apdpd|sapdmd|adpdmd|sadpdmd|admd|sadmd");
  run->add_option("--alpha", alphas, "alpha, or a comma separated list to sweep")->delimiter(',');
  auto* o_beta = run->add_option("--beta", beta);
  auto* o_t0 = run->add_option("--t0", t0);
  auto* o_tf = run->add_option("--tf", tf);
  auto* o_mu0 = run->add_option("--mu0", mu0, "smoothing schedule mu(t) = mu0 t^(-2 alpha)");
  auto* o_seed = run->add_option("--seed", seed, "instance seed for generated problems");
  auto* o_rtol = run->add_option("--rel-tol", rel_tol);
  auto* o_atol = run->add_option("--abs-tol", abs_tol);
  auto* o_ppd = run->add_option("--points-per-decade", ppd);
  auto* o_out = run->add_option("--out", out, "output directory");

  auto* verify = app.add_subcommand("verify", "run the acceptance checks");
  double slack = 1.05;
  std::vector<int> only;
  verify->add_option("--slack", slack)->group("");
  verify->add_option("--only", only, "criterion numbers")->delimiter(',');

  auto* list = app.add_subcommand("list", "print the problem and system catalogue");
  std::string filter;
  list->add_option("filter", filter, "substring filter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  if (*o_problem) o.problem = problem;
  if (*o_system) o.system = system;
  if (*o_beta) o.beta = beta;
  if (*o_t0) o.t0 = t0;
  if (*o_tf) o.tf = tf;
  if (*o_mu0) o.mu0 = mu0;
  if (*o_seed) o.seed = seed;
  if (*o_rtol) o.rel_tol = rel_tol;
  if (*o_atol) o.abs_tol = abs_tol;
  if (*o_ppd) o.points_per_decade = ppd;
  if (*o_out) o.out = out;

  try {
    if (*run) return cmd_run(config_path, o, alphas);
    if (*verify) return cmd_verify(slack, only);
    return cmd_list(filter);
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
