#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "mirrorflow/diagnostics.hpp"

namespace mirrorflow {

enum class ProblemFamily { Constrained, Consensus, Monotropic };

inline const char* to_string(ProblemFamily f) {
  switch (f) {
    case ProblemFamily::Constrained: return "constrained";
    case ProblemFamily::Consensus: return "consensus";
    case ProblemFamily::Monotropic: return "monotropic";
  }
  return "?";
}

// Settings a catalogue problem runs with when the caller does not override them.
struct RunDefaults {
  SystemKind system = SystemKind::APDMD;
  double alpha = 3.0;
  double beta = 1.0;
  double tf = 100.0;
  std::optional<double> mu0;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
};

struct ProblemInfo {
  std::string name;
  ProblemFamily family;
  std::string description;
  std::optional<std::uint64_t> default_seed;  // set for randomly generated instances
  RunDefaults defaults;
};

inline const std::vector<ProblemInfo>& problem_catalogue() {
  static const std::vector<ProblemInfo> c = {
      {"scalar", ProblemFamily::Constrained, "min x^2/2 s.t. x = 1, Euclidean map", std::nullopt,
       {SystemKind::APDMD, 2.0, 1.0, 100.0, std::nullopt, 1e-9, 1e-12}},
      {"logregress", ProblemFamily::Constrained,
       "logistic loss on the unit simplex with two linear constraints, simplex entropy map", std::nullopt,
       {SystemKind::APDMD, 2.0, 1.0, 100.0, std::nullopt, 1e-9, 1e-12}},
      {"dis_log", ProblemFamily::Consensus,
       "4 agents on a ring, logistic losses, simplex / orthant / sphere / half-space local sets", std::nullopt,
       {SystemKind::ADPDMD, 3.0, 1.0, 100.0, std::nullopt, 1e-9, 1e-12}},
      {"d_sp", ProblemFamily::Monotropic,
       "10 agents on a ring, PSD quadratics on boxes, coupled by sum_i x_i = sum_i d_i", 1,
       {SystemKind::ADMD, 3.0, 1.0, 100.0, std::nullopt, 1e-8, 1e-10}},
      {"nbp", ProblemFamily::Constrained,
       "nonnegative basis pursuit, 10 x 40, planted 2-sparse signal, negative entropy map", kDefaultNbpSeed,
       {SystemKind::SAPDMD, 4.0, 5.0, 200.0, 1.0, 1e-8, 1e-10}},
      {"d_bp_r", ProblemFamily::Consensus,
       "basis pursuit split by rows over 5 agents, affine local sets, projection maps", kDefaultBpSeed,
       {SystemKind::SADPDMD, 3.0, 5.0, 200.0, 1.5e6, 1e-6, 1e-8}},
      {"d_bp_c", ProblemFamily::Monotropic,
       "basis pursuit split by columns over 10 agents, Euclidean maps", kDefaultBpSeed,
       {SystemKind::SADMD, 3.0, 1.0, 200.0, 1e8, 1e-6, 1e-8}},
  };
  return c;
}

struct SystemInfo {
  SystemKind kind;
  std::string name;
  ProblemFamily family;
  std::string description;
};

inline const std::vector<SystemInfo>& system_catalogue() {
  static const std::vector<SystemInfo> c = {
      {SystemKind::APDMD, "apdmd", ProblemFamily::Constrained, "accelerated primal-dual mirror dynamics"},
      {SystemKind::APDPD, "apdpd", ProblemFamily::Constrained, "apdmd with a projection map"},
      {SystemKind::SAPDMD, "sapdmd", ProblemFamily::Constrained, "apdmd on a smoothed objective"},
      {SystemKind::ADPDMD, "adpdmd", ProblemFamily::Consensus, "distributed primal-dual mirror dynamics"},
      {SystemKind::SADPDMD, "sadpdmd", ProblemFamily::Consensus, "adpdmd on smoothed objectives"},
      {SystemKind::ADMD, "admd", ProblemFamily::Monotropic, "distributed mirror dynamics for coupled resources"},
      {SystemKind::SADMD, "sadmd", ProblemFamily::Monotropic, "admd on smoothed objectives"},
  };
  return c;
}

inline const ProblemInfo* find_problem(const std::string& name) {
  for (const auto& p : problem_catalogue())
    if (p.name == name) return &p;
  return nullptr;
}

inline const SystemInfo* find_system(const std::string& name) {
  for (const auto& s : system_catalogue())
    if (s.name == name) return &s;
  return nullptr;
}

inline const SystemInfo& system_info(SystemKind k) {
  for (const auto& s : system_catalogue())
    if (s.kind == k) return s;
  throw UnsupportedError("system without catalogue entry");
}

// One line per problem and per system whose name or description contains filter.
inline std::vector<std::string> list_catalogue(const std::string& filter = "") {
  std::vector<std::string> out;
  auto match = [&](const std::string& a, const std::string& b) {
    return filter.empty() || a.find(filter) != std::string::npos || b.find(filter) != std::string::npos;
  };
  for (const auto& p : problem_catalogue())
    if (match(p.name, p.description))
      out.push_back("problem " + p.name + " [" + to_string(p.family) + "] " + p.description);
  for (const auto& s : system_catalogue())
    if (match(s.name, s.description))
      out.push_back("system  " + s.name + " [" + to_string(s.family) + "] " + s.description);
  return out;
}

using AnyProblem = std::variant<ConstrainedProblem, ConsensusProblem, MonotropicProblem>;

inline ProblemFamily family_of(const AnyProblem& p) {
  return static_cast<ProblemFamily>(p.index());
}

inline const std::string& name_of(const AnyProblem& p) {
  return std::visit([](const auto& q) -> const std::string& { return q.name; }, p);
}

inline AnyProblem build_problem(const std::string& name, std::optional<std::uint64_t> seed = std::nullopt) {
  const ProblemInfo* info = find_problem(name);
  if (!info) {
    std::string known;
    for (const auto& p : problem_catalogue()) known += (known.empty() ? "" : ", ") + p.name;
    throw ParameterError("unknown problem '" + name + "', known problems: " + known);
  }
  if (seed && !info->default_seed) throw ParameterError("problem '" + name + "' takes no seed");
  const std::uint64_t s = seed.value_or(info->default_seed.value_or(0));
  if (name == "scalar") return build_scalar();
  if (name == "logregress") return build_logistic_centralized();
  if (name == "dis_log") return build_dis_logistic();
  if (name == "d_sp") return build_dist_qp(s);
  if (name == "nbp") return build_nbp(s);
  if (name == "d_bp_r") return build_dbp_row(s);
  return build_dbp_col(s);
}

struct ExperimentConfig {
  std::string problem;
  std::optional<AnyProblem> inline_problem;  // used instead of the catalogue when set
  SystemKind system = SystemKind::APDMD;
  double alpha = 3.0;
  double beta = 1.0;
  double t0 = 1.0;
  double tf = 100.0;
  std::optional<double> mu0;
  std::optional<std::uint64_t> seed;
  IntegratorConfig integrator;
  double slack = 1.05;
};

// Config preloaded with the catalogue defaults for a problem.
inline ExperimentConfig default_config(const std::string& problem) {
  const ProblemInfo* info = find_problem(problem);
  if (!info) build_problem(problem);  // throws with the list of names
  ExperimentConfig c;
  c.problem = problem;
  c.system = info->defaults.system;
  c.alpha = info->defaults.alpha;
  c.beta = info->defaults.beta;
  c.tf = info->defaults.tf;
  c.mu0 = info->defaults.mu0;
  c.integrator.rel_tol = info->defaults.rel_tol;
  c.integrator.abs_tol = info->defaults.abs_tol;
  return c;
}

inline bool objective_is_smooth(const AnyProblem& p) {
  return std::visit(
      [](const auto& q) {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, ConstrainedProblem>)
          return q.objective.is_smooth();
        else
          return stacked_objective(q).is_smooth();
      },
      p);
}

// Rejects configurations that cannot run, before any computation.
inline void validate_config(const ExperimentConfig& c, const AnyProblem& p) {
  const SystemInfo& s = system_info(c.system);
  if (s.family != family_of(p))
    throw ParameterError("system " + s.name + " needs a " + to_string(s.family) + " problem, '" + name_of(p) +
                         "' is " + to_string(family_of(p)));
  if (is_smoothed(c.system)) {
    if (!c.mu0) throw ParameterError("system " + s.name + " needs --mu0");
    if (objective_is_smooth(p))
      throw ParameterError("system " + s.name + " needs a nonsmooth objective with a smoothing");
  } else {
    if (!objective_is_smooth(p))
      throw ParameterError("problem '" + name_of(p) + "' is nonsmooth, use a smoothed system");
    if (c.mu0) throw ParameterError("--mu0 only applies to smoothed systems");
  }
  if (c.system == SystemKind::APDPD && std::get<ConstrainedProblem>(p).mirror.kind() != MapKind::Projection)
    throw ParameterError("apdpd needs a problem with a projection map");
  if (!(c.tf > c.t0) || !(c.t0 > 0.0)) throw ParameterError("need 0 < t0 < tf");
  if (!(c.slack > 0.0)) throw ParameterError("slack must be positive");
  SystemParams prm{c.alpha, c.beta, c.t0, std::nullopt};
  prm.validate();
  c.integrator.validate();
}

inline SystemParams system_params(const ExperimentConfig& c) {
  SystemParams prm{c.alpha, c.beta, c.t0, std::nullopt};
  if (is_smoothed(c.system)) prm.mu = MuSchedule(*c.mu0, c.alpha, c.t0);
  if (c.system == SystemKind::ADMD || c.system == SystemKind::SADMD) prm.beta = 1.0;
  return prm;
}

// Recovery of a planted signal: support by magnitude threshold, l1 mass off the support.
struct Recovery {
  bool support_match = false;
  double off_support_mass = 0.0;
  double max_error = 0.0;
};

inline Recovery recovery(const Vector& x, const Vector& planted, double threshold = 1e-2) {
  require_size(x.size(), planted.size(), "recovery");
  Recovery r{true, 0.0, 0.0};
  for (Index i = 0; i < x.size(); ++i) {
    const bool on = planted(i) != 0.0;
    if (on != (std::abs(x(i)) > threshold)) r.support_match = false;
    if (!on) r.off_support_mass += std::abs(x(i));
  }
  r.max_error = (x - planted).cwiseAbs().maxCoeff();
  return r;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::string problem;
  ProblemFamily family = ProblemFamily::Constrained;
  ReferenceSolution reference;
  Trajectory trajectory;
  RunReport report;
  BoundCheck check;
  std::optional<RateFit> gap_fit, feasibility_fit;
  Vector x_final;
  std::optional<Vector> planted;
  std::optional<Recovery> recovered;
  double runtime_seconds = 0.0;
  std::vector<std::string> warnings;

  bool ok() const { return trajectory.ok(); }
};

namespace detail {

template <class P>
VectorField field_for(SystemKind k, const P& p, const SystemParams& prm) {
  if constexpr (std::is_same_v<P, ConstrainedProblem>) {
    if (k == SystemKind::APDMD) return apdmd_field(p, prm);
    if (k == SystemKind::APDPD) return apdpd_field(p, prm);
    if (k == SystemKind::SAPDMD) return sapdmd_field(p, prm);
  } else if constexpr (std::is_same_v<P, ConsensusProblem>) {
    if (k == SystemKind::ADPDMD) return adpdmd_field(p, prm);
    if (k == SystemKind::SADPDMD) return sadpdmd_field(p, prm);
  } else {
    if (k == SystemKind::ADMD) return admd_field(p, prm);
    if (k == SystemKind::SADMD) return sadmd_field(p, prm);
  }
  throw ParameterError(std::string("system ") + to_string(k) + " does not fit problem " + p.name);
}

inline void fit_rates(ExperimentResult& r) {
  auto fit = [&](const std::vector<double>& v, const char* what) -> std::optional<RateFit> {
    if (r.report.times.size() < 10) return std::nullopt;
    auto f = rate_fit(r.report.times, v);
    if (f.clipped)
      r.warnings.push_back(std::to_string(f.clipped) + " nonpositive " + what + " samples clipped at 1e-16");
    return f;
  };
  r.gap_fit = fit(r.report.bound_gap, "gap");
  r.feasibility_fit = fit(r.report.feasibility, "feasibility");
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const AnyProblem problem = c.inline_problem ? *c.inline_problem : build_problem(c.problem, c.seed);
  validate_config(c, problem);
  const SystemParams prm = system_params(c);

  ExperimentResult r;
  r.config = c;
  r.problem = name_of(problem);
  r.family = family_of(problem);
  std::visit(
      [&](const auto& p) {
        r.reference = reference_solution(p);
        const VectorField field = detail::field_for(c.system, p, prm);
        const Vector y0 = pack(field.layout(), initial_state(p));
        std::function<double(double)> mu;
        if (prm.mu) mu = [s = *prm.mu](double t) { return s(t); };
        r.trajectory = integrate(field, y0, c.t0, c.tf, c.integrator, mu);
        if (r.trajectory.size() == 0) return;
        r.report = evaluate_run(c.system, r.trajectory, p, r.reference, prm);
        r.check = check_bounds(r.report, prm, r.report.v0, c.slack);
        r.x_final = unpack(field.layout(), r.trajectory.states.back()).x;
        r.planted = p.planted;
      },
      problem);
  if (!r.trajectory.ok()) r.warnings.push_back(std::string("integration stopped: ") + r.trajectory.message);
  if (r.trajectory.size() > 0) {
    for (const auto& w : r.report.warnings) r.warnings.push_back(w);
    detail::fit_rates(r);
    if (r.planted) r.recovered = recovery(r.x_final, *r.planted);
  }
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// Worker count for sweeps: MIRRORFLOW_THREADS when set to a positive integer, else the hardware count.
inline unsigned sweep_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MIRRORFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return hw;
}

// Independent runs on up to `threads` workers. Results keep the order of configs; the first
// exception thrown by any run is rethrown after all workers finish.
inline std::vector<ExperimentResult> run_sweep(const std::vector<ExperimentConfig>& configs,
                                               unsigned threads = sweep_threads()) {
  std::vector<ExperimentResult> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < configs.size();) {
      try {
        out[i] = run_experiment(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(configs.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace mirrorflow
