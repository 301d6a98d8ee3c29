#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mirrorflow/experiment.hpp"
#include "mirrorflow/smoothing.hpp"

namespace mirrorflow::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;
};

struct Options {
  double slack = 1.05;
  std::set<int> only;  // empty runs everything
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Tally {
  bool ok = true;
  std::ostringstream msg;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      msg << (msg.tellp() > 0 ? "; " : "") << "FAILED " << what;
    }
  }
  void note(const std::string& what) { msg << (msg.tellp() > 0 ? "; " : "") << what; }
};

// ---------------------------------------------------------------------------
// criterion 1: property sweeps over the building blocks

inline Vector ball_sample(SeededRng& rng, Index n, double radius) {
  Vector g = random_gaussian_vector(rng, n);
  return radius * rng.uniform() * g / g.norm();
}

inline Vector dual_sample(SeededRng& rng, const MirrorMap& m, double radius) {
  Vector u = ball_sample(rng, m.dim(), radius);
  if (m.kind() == MapKind::ItakuraSaito) u = -(u.array().abs() + 0.05).matrix();
  return u;
}

inline void mirror_map_properties(Tally& t) {
  SeededRng rng(101);
  const Index n = 5;
  const std::vector<MirrorMap> maps{MirrorMap::euclidean(n), MirrorMap::negative_entropy(n),
                                    MirrorMap::itakura_saito(n), MirrorMap::simplex_entropy(n)};
  for (const auto& m : maps) {
    const std::string k = to_string(m.kind());
    double range = 0.0, fy = 0.0, mono = 0.0, hess = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const Vector u = dual_sample(rng, m, 10.0), w = dual_sample(rng, m, 10.0);
      const Vector x = grad_conjugate(m, u);
      range = std::max(range, m.membership_residual(x));
      fy = std::max(fy, std::abs(fenchel_young_gap(m, u, x)));
      mono = std::max(mono, -(x - grad_conjugate(m, w)).dot(u - w));
    }
    for (int i = 0; i < 100; ++i) {
      const Vector u = dual_sample(rng, m, 3.0);
      const Matrix h = hessian_conjugate(m, u);
      Matrix fd(n, n);
      for (Index j = 0; j < n; ++j) {
        const double step = 1e-6 * std::max(1.0, std::abs(u(j)));
        Vector up = u, dn = u;
        up(j) += step;
        dn(j) -= step;
        fd.col(j) = (grad_conjugate(m, up) - grad_conjugate(m, dn)) / (2.0 * step);
      }
      hess = std::max(hess, (h - fd).norm() / std::max(h.norm(), 1e-300));
    }
    t.require(range <= 1e-10, k + " range " + fmt(range));
    t.require(fy <= 1e-8, k + " Fenchel-Young " + fmt(fy));
    t.require(mono <= 1e-12, k + " monotonicity " + fmt(mono));
    t.require(hess <= 1e-5, k + " Hessian vs differences " + fmt(hess));
  }
}

inline void projection_properties(Tally& t) {
  SeededRng rng(202);
  const Index n = 6;
  Vector c(n);
  c << 0.1, -0.3, 0.5, 0.0, 2.0, -1.0;
  const Matrix a = random_gaussian_matrix(rng, 3, n);
  const Vector b = random_gaussian_vector(rng, 3);
  const std::vector<Projector> sets{Projector::box(Vector::Constant(n, -1.0), Vector::Constant(n, 0.5)),
                                    Projector::sphere(c, 2.0),
                                    Projector::affine(a, b),
                                    Projector::half_space(Vector::Ones(n), 1.0),
                                    Projector::simplex(n),
                                    Projector::orthant(n)};
  for (const auto& s : sets) {
    const std::string k = s.describe();
    const bool exact = k == "box" || k == "half_space";
    double idem = 0.0, expand = 0.0, vi = 0.0, aff = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const Vector u = ball_sample(rng, n, 10.0), w = ball_sample(rng, n, 10.0);
      const Vector pu = s.project(u), pw = s.project(w);
      idem = std::max(idem, (s.project(pu) - pu).lpNorm<Eigen::Infinity>());
      expand = std::max(expand, (pu - pw).norm() - (u - w).norm());
      // (u - P u)^T (z - P u) <= 0 for z in the set
      vi = std::max(vi, (u - pu).dot(pw - pu) / std::max(1.0, (u - pu).norm() * (pw - pu).norm()));
      if (k == "affine") aff = std::max(aff, (a * pu - b).lpNorm<Eigen::Infinity>());
    }
    t.require(exact ? idem == 0.0 : idem <= 1e-12, k + " idempotence " + fmt(idem));
    t.require(expand <= 1e-12, k + " nonexpansive " + fmt(expand));
    t.require(vi <= 1e-10, k + " variational inequality " + fmt(vi));
    t.require(aff <= 1e-10, k + " affine residual " + fmt(aff));
  }
}

inline void smoothing_properties(Tally& t) {
  SeededRng rng(303);
  double sandwich = 0.0, mono = 0.0, lip = 0.0, convex = 0.0;
  for (double mu : {1.0, 0.1, 0.01}) {
    for (int i = -4000; i <= 4000; ++i) {
      const double s = 1e-3 * i;
      const double g = smooth_max_zero(s, mu).value - std::max(0.0, s);
      const double th = smooth_abs(s, mu).value - std::abs(s);
      sandwich = std::max({sandwich, -g, g - 0.25 * mu, -th, th - 0.25 * mu});
      mono = std::max(mono, smooth_abs(s, 0.5 * mu).value - smooth_abs(s, mu).value);
      mono = std::max(mono, smooth_max_zero(s, 0.5 * mu).value - smooth_max_zero(s, mu).value);
    }
  }
  for (int i = 0; i < 10000; ++i) {
    const double s = rng.uniform(-3.0, 3.0), m1 = rng.uniform(1e-4, 2.0), m2 = rng.uniform(1e-4, 2.0);
    lip = std::max(lip, std::abs(smooth_abs(s, m1).value - smooth_abs(s, m2).value) - 0.25 * std::abs(m1 - m2));
    const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
    const double mid = smooth_abs(0.5 * (a + b), m1).value;
    convex = std::max(convex, mid - 0.5 * (smooth_abs(a, m1).value + smooth_abs(b, m1).value));
  }
  double consistency = std::abs(smooth_abs(0.0, 1e-9).grad);
  for (double s : {-2.0, -0.1, 0.3, 1.5}) consistency = std::max(consistency, std::abs(smooth_abs(s, 1e-9).grad - (s > 0 ? 1.0 : -1.0)));
  t.require(sandwich <= 1e-15, "smoothing sandwich " + fmt(sandwich));
  t.require(mono <= 0.0, "smoothing mu monotone " + fmt(mono));
  t.require(lip <= 1e-14, "smoothing mu Lipschitz " + fmt(lip));
  t.require(convex <= 1e-14, "smoothing convexity " + fmt(convex));
  t.require(consistency <= 1e-12, "smoothing gradient limit " + fmt(consistency));
}

inline void graph_properties(Tally& t) {
  SeededRng rng(404);
  for (const Graph& g : {Graph::ring(7), Graph::path(5), Graph::complete(4)}) {
    const Matrix l = laplacian(g);
    bool rows_zero = true;
    for (Index i = 0; i < l.rows(); ++i) rows_zero = rows_zero && l.row(i).sum() == 0.0;
    t.require(rows_zero, "Laplacian rows sum to zero");
    t.require((l - l.transpose()).cwiseAbs().maxCoeff() == 0.0, "Laplacian symmetric");
    const Index m = 3;
    const LiftedLaplacian lift(g, m);
    const Matrix full = lift.full();
    double psd = 0.0, edge = 0.0, dense = 0.0;
    for (int i = 0; i < 500; ++i) {
      const Vector x = random_gaussian_vector(rng, lift.dim());
      const Vector lx = lift.apply(x);
      dense = std::max(dense, (lx - full * x).cwiseAbs().maxCoeff());
      const double q = x.dot(lx);
      psd = std::max(psd, -q);
      double blockwise = 0.0;
      for (const auto& e : g.edges())
        blockwise += e.weight * (x.segment(e.a * m, m) - x.segment(e.b * m, m)).squaredNorm();
      edge = std::max(edge, std::abs(consensus_residual(g, m, x) - blockwise) / std::max(1.0, blockwise));
      edge = std::max(edge, std::abs(q - blockwise) / std::max(1.0, blockwise));
    }
    t.require(psd <= 1e-12, "Laplacian PSD " + fmt(psd));
    t.require(edge <= 1e-12, "lifted residual equals edge sum " + fmt(edge));
    t.require(dense <= 1e-12, "lifted apply matches kron form " + fmt(dense));
  }
}

inline CriterionResult criterion_properties() {
  CriterionResult r{1, "unit property sweeps", false, "", 0.0, 30.0};
  const auto t0 = Clock::now();
  Tally t;
  try {
    mirror_map_properties(t);
    projection_properties(t);
    smoothing_properties(t);
    graph_properties(t);
  } catch (const std::exception& e) {
    t.require(false, std::string("exception: ") + e.what());
  }
  r.seconds = since(t0);
  if (t.ok) t.note("mirror maps, projections, smoothing, Laplacians");
  r.passed = t.ok && r.seconds < r.budget;
  r.detail = t.msg.str();
  return r;
}

// ---------------------------------------------------------------------------
// end to end runs

inline ExperimentConfig config_for(const std::string& problem, double alpha, double slack) {
  ExperimentConfig c = default_config(problem);
  c.alpha = alpha;
  c.slack = slack;
  return c;
}

inline double max_simplex_violation(const ExperimentResult& r, double& min_coord) {
  const StateLayout l{r.x_final.size(), r.reference.lambda.size(), 0};
  double worst = 0.0;
  min_coord = kInf;
  for (const auto& y : r.trajectory.states) {
    const Vector x = y.segment(l.x(), l.n);
    worst = std::max(worst, std::abs(x.sum() - 1.0));
    min_coord = std::min(min_coord, x.minCoeff());
  }
  return worst;
}

inline CriterionResult criterion_scalar(double slack) {
  CriterionResult r{2, "scalar problem, apdmd alpha=2", false, "", 0.0, 5.0};
  const auto t0 = Clock::now();
  Tally t;
  try {
    const auto res = run_experiment(config_for("scalar", 2.0, slack));
    t.require(res.ok(), "integration");
    t.require(res.check.gap_ok, "gap t^2 <= slack alpha^2 V0, max ratio " + fmt(res.check.gap_ratio_max));
    t.require(res.check.lyapunov_ok, "Lyapunov nonincreasing, worst excess " + fmt(res.check.lyapunov_max_increase));
    t.require(res.gap_fit && res.gap_fit->slope <= -1.8,
              "gap slope " + fmt(res.gap_fit ? res.gap_fit->slope : 0.0) + " <= -1.8");
    if (t.ok)
      t.note("gap ratio " + fmt(res.check.gap_ratio_max) + ", slope " + fmt(res.gap_fit->slope));
  } catch (const std::exception& e) {
    t.require(false, std::string("exception: ") + e.what());
  }
  r.seconds = since(t0);
  r.passed = t.ok && r.seconds < r.budget;
  r.detail = t.msg.str();
  return r;
}

inline CriterionResult criterion_logregress(double slack) {
  CriterionResult r{3, "logregress, apdmd alpha in {2,4,6}", false, "", 0.0, 90.0};
  const auto t0 = Clock::now();
  Tally t;
  try {
    for (double alpha : {2.0, 4.0, 6.0}) {
      const auto start = Clock::now();
      const auto res = run_experiment(config_for("logregress", alpha, slack));
      const std::string a = "alpha=" + fmt(alpha) + ": ";
      t.require(res.ok(), a + "integration");
      t.require(std::abs(res.reference.f - std::log1p(std::exp(-1.0))) <= 1e-9, a + "f* = log(1 + 1/e)");
      double min_x = 0.0;
      const double sum_dev = max_simplex_violation(res, min_x);
      t.require(sum_dev <= 1e-6, a + "|1^T x - 1| " + fmt(sum_dev));
      t.require(min_x >= -1e-8, a + "min x " + fmt(min_x));
      t.require(res.check.feasibility_ok, a + "|Ax - b| bound, max ratio " + fmt(res.check.feasibility_ratio_max));
      const double slope = res.feasibility_fit ? res.feasibility_fit->slope : 0.0;
      t.require(slope <= -0.9, a + "|Ax - b| slope " + fmt(slope));
      const double secs = since(start);
      t.require(secs < 30.0, a + "runtime " + fmt(secs) + " s");
      if (t.ok) t.note(a + "ratio " + fmt(res.check.feasibility_ratio_max) + " slope " + fmt(slope));
    }
  } catch (const std::exception& e) {
    t.require(false, std::string("exception: ") + e.what());
  }
  r.seconds = since(t0);
  r.passed = t.ok && r.seconds < r.budget;
  r.detail = t.msg.str();
  return r;
}

inline CriterionResult criterion_final_consensus(int id, const std::string& name, const std::string& problem,
                                                 double alpha, double slack, double budget, const char* what) {
  CriterionResult r{id, name, false, "", 0.0, budget};
  const auto t0 = Clock::now();
  Tally t;
  try {
    const auto res = run_experiment(config_for(problem, alpha, slack));
    t.require(res.ok(), "integration");
    t.require(res.check.final_feasibility_ok,
              std::string(what) + "(T) bound, ratio " + fmt(res.check.final_feasibility_ratio));
    t.require(res.check.membership_max <= 1e-6, "local set membership " + fmt(res.check.membership_max));
    if (t.ok)
      t.note(std::string(what) + "(T) ratio " + fmt(res.check.final_feasibility_ratio) + ", membership " +
             fmt(res.check.membership_max));
  } catch (const std::exception& e) {
    t.require(false, std::string("exception: ") + e.what());
  }
  r.seconds = since(t0);
  r.passed = t.ok && r.seconds < r.budget;
  r.detail = t.msg.str();
  return r;
}

inline void require_recovery(Tally& t, const ExperimentResult& res, const std::string& a) {
  if (!res.recovered) {
    t.require(false, a + "no planted signal");
    return;
  }
  const double ferr = std::abs(res.report.signed_primal.back());
  t.require(res.recovered->support_match, a + "support matches the planted support");
  t.require(res.recovered->off_support_mass <= 1e-3, a + "off-support mass " + fmt(res.recovered->off_support_mass));
  t.require(ferr <= 1e-3, a + "|f(x(T)) - f*| " + fmt(ferr));
  if (t.ok) t.note(a + "off-support " + fmt(res.recovered->off_support_mass) + ", |f - f*| " + fmt(ferr));
}

inline CriterionResult criterion_nbp(double slack) {
  CriterionResult r{6, "nbp, sapdmd alpha in {2,4}", false, "", 0.0, 120.0};
  const auto t0 = Clock::now();
  Tally t;
  try {
    for (double alpha : {2.0, 4.0}) {
      const auto res = run_experiment(config_for("nbp", alpha, slack));
      const std::string a = "alpha=" + fmt(alpha) + ": ";
      t.require(res.ok(), a + "integration");
      t.require(res.check.gap_ok, a + "smoothed gap bound, max ratio " + fmt(res.check.gap_ratio_max));
      require_recovery(t, res, a);
    }
  } catch (const std::exception& e) {
    t.require(false, std::string("exception: ") + e.what());
  }
  r.seconds = since(t0);
  r.passed = t.ok && r.seconds < r.budget;
  r.detail = t.msg.str();
  return r;
}

inline CriterionResult criterion_basis_pursuit(int id, const std::string& problem, double slack) {
  const ExperimentConfig c = config_for(problem, default_config(problem).alpha, slack);
  CriterionResult r{id, problem + ", " + to_string(c.system), false, "", 0.0, 180.0};
  const auto t0 = Clock::now();
  Tally t;
  try {
    const auto res = run_experiment(c);
    t.require(res.ok(), "integration");
    t.require(res.check.feasibility_ok, "consensus residual bound, max ratio " + fmt(res.check.feasibility_ratio_max));
    require_recovery(t, res, "");
  } catch (const std::exception& e) {
    t.require(false, std::string("exception: ") + e.what());
  }
  r.seconds = since(t0);
  r.passed = t.ok && r.seconds < r.budget;
  r.detail = t.msg.str();
  return r;
}

// min |x - c|^2 s.t. 1^T x = 1 in R^3
inline ConstrainedProblem cross_form_problem(MirrorMap map) {
  Vector c(3);
  c << 0.5, 0.2, 0.9;
  Matrix q = Matrix::Identity(3, 3);
  ConstrainedProblem p{"cross_form",
                       Objective::quadratic(q, -2.0 * c),
                       Matrix::Ones(1, 3),
                       Vector::Ones(1),
                       std::move(map),
                       Vector::Constant(3, 0.3),
                       std::nullopt};
  p.validate();
  return p;
}

inline CriterionResult criterion_cross_form() {
  CriterionResult r{8, "first vs second order apdmd", false, "", 0.0, 10.0};
  const auto t0 = Clock::now();
  Tally t;
  try {
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-10;
    cfg.abs_tol = 1e-10;
    const double tol = 10.0 * cfg.rel_tol;
    SystemParams prm{3.0, 1.0, 1.0, std::nullopt};
    for (const auto& map : {MirrorMap::euclidean(3), MirrorMap::negative_entropy(3)}) {
      const auto p = cross_form_problem(map);
      const auto first = apdmd_field(p, prm);
      const auto second = apdmd_second_order_field(p, prm);
      const Vector y0 = pack(first.layout(), initial_state(p));
      const auto a = integrate(first, y0, 1.0, 20.0, cfg);
      const auto b = integrate(second, to_second_order(first.layout(), p.mirror, 1.0, prm.alpha, y0), 1.0, 20.0, cfg);
      t.require(a.ok() && b.ok(), std::string(to_string(map.kind())) + " integration");
      double diff = 0.0;
      const StateLayout& l = first.layout();
      for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
        diff = std::max(diff, (a.states[k].segment(l.x(), l.n) - b.states[k].segment(l.x(), l.n)).lpNorm<Eigen::Infinity>());
        diff = std::max(diff, (a.states[k].segment(l.lambda(), l.m) - b.states[k].segment(l.lambda(), l.m)).lpNorm<Eigen::Infinity>());
      }
      t.require(diff <= tol, std::string(to_string(map.kind())) + " sup difference " + fmt(diff) + " <= " + fmt(tol));
      if (t.ok) t.note(std::string(to_string(map.kind())) + " sup difference " + fmt(diff));
    }
  } catch (const std::exception& e) {
    t.require(false, std::string("exception: ") + e.what());
  }
  r.seconds = since(t0);
  r.passed = t.ok && r.seconds < r.budget;
  r.detail = t.msg.str();
  return r;
}

inline CriterionResult criterion_oracle() {
  CriterionResult r{9, "reference solutions, KKT residual <= 1e-8", false, "", 0.0, 60.0};
  const auto t0 = Clock::now();
  Tally t;
  try {
    for (const auto& info : problem_catalogue()) {
      const AnyProblem p = build_problem(info.name);
      const ReferenceSolution ref = std::visit([](const auto& q) { return reference_solution(q); }, p);
      t.require(ref.kkt_residual <= 1e-8, info.name + " KKT residual " + fmt(ref.kkt_residual));
    }
    if (t.ok) t.note("all catalogue problems");
  } catch (const std::exception& e) {
    t.require(false, std::string("exception: ") + e.what());
  }
  r.seconds = since(t0);
  r.passed = t.ok && r.seconds < r.budget;
  r.detail = t.msg.str();
  return r;
}

}  // namespace detail

inline std::string format(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "[%s] %d %s", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
  char tail[64];
  std::snprintf(tail, sizeof tail, " (%.1f s of %.0f s)", r.seconds, r.budget);
  return std::string(head) + ": " + r.detail + tail;
}

// Runs the selected criteria in order, reporting each line through `sink` as soon as it is done.
inline std::vector<CriterionResult> run(const Options& opt,
                                        const std::function<void(const CriterionResult&)>& sink = nullptr) {
  using namespace detail;
  using List = std::vector<CriterionResult>;
  const std::vector<std::pair<int, std::function<List()>>> all = {
      {1, [] { return List{criterion_properties()}; }},
      {2, [&] { return List{criterion_scalar(opt.slack)}; }},
      {3, [&] { return List{criterion_logregress(opt.slack)}; }},
      {4, [&] {
         return List{criterion_final_consensus(4, "dis_log, adpdmd alpha=3", "dis_log", 3.0, opt.slack, 60.0, "x^T L x")};
       }},
      {5, [&] {
         return List{criterion_final_consensus(5, "d_sp, admd alpha=3", "d_sp", 3.0, opt.slack, 120.0,
                                               "lambda^T L lambda")};
       }},
      {6, [&] { return List{criterion_nbp(opt.slack)}; }},
      {7, [&] {
         List l{criterion_basis_pursuit(7, "d_bp_r", opt.slack)};
         if (sink) sink(l.back());
         l.push_back(criterion_basis_pursuit(7, "d_bp_c", opt.slack));
         return l;
       }},
      {8, [] { return List{criterion_cross_form()}; }},
      {9, [] { return List{criterion_oracle()}; }},
  };
  List out;
  for (const auto& [id, fn] : all) {
    if (!opt.only.empty() && !opt.only.count(id)) continue;
    const List got = fn();
    for (std::size_t i = 0; i < got.size(); ++i) {
      out.push_back(got[i]);
      if (sink && (id != 7 || i + 1 == got.size())) sink(got[i]);
    }
  }
  return out;
}

inline bool all_passed(const std::vector<CriterionResult>& rs) {
  for (const auto& r : rs)
    if (!r.passed) return false;
  return !rs.empty();
}

}  // namespace mirrorflow::acceptance
