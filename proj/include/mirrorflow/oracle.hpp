#pragma once

// Reference solutions for the catalogue problems. Deliberately independent of the
// dynamics: augmented Lagrangian outer loop, accelerated projected gradient inner loop,
// and an active set polish for the l1 (linear program) instances.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mirrorflow/graph.hpp"
#include "mirrorflow/numerics.hpp"
#include "mirrorflow/problems.hpp"
#include "mirrorflow/projections.hpp"

namespace mirrorflow {

struct ReferenceSolution {
  Vector x;
  Vector lambda;            // multiplier in the problem's own Lagrangian
  std::optional<Vector> y;  // auxiliary point for monotropic problems
  double f = 0.0;
  double kkt_residual = kInf;
  std::optional<double> dual_certificate;  // LP reduced cost violation, l1 problems only
  std::string method;
};

struct OracleOptions {
  int max_outer = 200;
  int max_inner = 200000;
  double rho0 = 10.0;
};

namespace oracle {

struct Block {
  Index offset, size;
  std::optional<Projector> set;
};

// min f(z) s.t. E z = e, z in prod of block sets. Linear programs set cost and use orthant blocks.
struct Program {
  Index dim = 0;
  std::function<double(const Vector&)> f;
  std::function<Vector(const Vector&)> grad;
  std::vector<Block> blocks;
  Matrix e;
  Vector rhs;
  std::optional<Vector> cost;
};

struct ProgramSolution {
  Vector z, nu;
  double stationarity = kInf, feasibility = kInf;
  double kkt() const { return std::max(stationarity, feasibility); }
  std::optional<double> reduced_cost_violation;
  bool polished = false;
};

inline Vector project(const Program& p, const Vector& z) {
  Vector out = z;
  for (const auto& b : p.blocks)
    if (b.set) out.segment(b.offset, b.size) = b.set->project(z.segment(b.offset, b.size));
  return out;
}

inline double natural_residual(const Program& p, const Vector& z, const Vector& g) {
  return (z - project(p, z - g)).lpNorm<Eigen::Infinity>();
}

inline Vector lagrangian_grad(const Program& p, const Vector& z, const Vector& nu) {
  return p.grad(z) + p.e.transpose() * nu;
}

inline void score(const Program& p, ProgramSolution& s) {
  s.stationarity = natural_residual(p, s.z, lagrangian_grad(p, s.z, s.nu));
  s.feasibility = p.e.rows() ? (p.e * s.z - p.rhs).lpNorm<Eigen::Infinity>() : 0.0;
  double memb = 0.0;
  for (const auto& b : p.blocks)
    if (b.set) memb = std::max(memb, b.set->membership_residual(s.z.segment(b.offset, b.size)));
  s.feasibility = std::max(s.feasibility, memb);
  if (p.cost) {
    const Vector r = *p.cost + p.e.transpose() * s.nu;
    s.reduced_cost_violation = std::max(0.0, -r.minCoeff());
  }
}

// Accelerated projected gradient with gradient based restart on
//   phi(z) = f(z) + nu^T (E z - e) + rho/2 |E z - e|^2.
// Step sizes come from a local Lipschitz estimate on gradient differences.
inline Vector solve_inner(const Program& p, Vector z, const Vector& nu, double rho, double tol, int max_iter,
                          double& lip, double& residual) {
  auto grad_phi = [&](const Vector& w) -> Vector {
    return p.grad(w) + p.e.transpose() * (nu + rho * (p.e * w - p.rhs));
  };
  Vector y = z, gz = grad_phi(z), gy = gz;
  double t = 1.0;
  residual = natural_residual(p, z, gz);
  for (int k = 0; k < max_iter && residual > tol; ++k) {
    Vector z_new, g_new;
    for (int bt = 0; bt < 60; ++bt) {
      z_new = project(p, y - gy / lip);
      g_new = grad_phi(z_new);
      const double dz = (z_new - y).norm();
      if (dz == 0.0 || (g_new - gy).norm() <= lip * dz * (1.0 + 1e-12)) break;
      lip *= 2.0;
    }
    const Vector step = z_new - z;
    if ((y - z_new).dot(step) > 0.0) {  // restart
      t = 1.0;
      y = z_new;
      gy = g_new;
    } else {
      const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = z_new + ((t - 1.0) / t_new) * step;
      gy = grad_phi(y);
      t = t_new;
    }
    z = std::move(z_new);
    gz = std::move(g_new);
    residual = natural_residual(p, z, gz);
    lip *= 0.95;
  }
  return z;
}

// Active set polish for min c^T z, E z = e, z >= 0: fix the support, solve the equations
// exactly, and move the multiplier to the nearest point with zero reduced cost on the support.
inline std::optional<ProgramSolution> polish_lp(const Program& p, const ProgramSolution& s, double threshold) {
  std::vector<Index> support;
  for (Index j = 0; j < s.z.size(); ++j)
    if (s.z(j) > threshold) support.push_back(j);
  if (support.empty()) return std::nullopt;
  const auto k = static_cast<Index>(support.size());
  Eigen::MatrixXd es(p.e.rows(), k);
  Vector cs(k);
  for (Index j = 0; j < k; ++j) {
    es.col(j) = p.e.col(support[static_cast<std::size_t>(j)]);
    cs(j) = (*p.cost)(support[static_cast<std::size_t>(j)]);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(es);
  Vector zs = cod.solve(p.rhs);
  if (zs.minCoeff() <= 0.0) return std::nullopt;
  ProgramSolution out;
  out.z = Vector::Zero(p.dim);
  for (Index j = 0; j < k; ++j) out.z(support[static_cast<std::size_t>(j)]) = zs(j);
  Eigen::MatrixXd est = es.transpose();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_t(est);
  out.nu = s.nu - cod_t.solve(est * s.nu + cs);
  out.polished = true;
  score(p, out);
  return out;
}

inline ProgramSolution solve(const Program& p, double tol, const OracleOptions& opt) {
  ProgramSolution s;
  s.z = project(p, Vector::Zero(p.dim));
  s.nu = Vector::Zero(p.e.rows());
  double rho = opt.rho0;
  double lip = 1.0;
  double prev_feas = kInf;
  double last = kInf;
  int inner_budget = opt.max_inner;
  ProgramSolution best = s;
  score(p, best);
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const double inner_tol = std::max(0.1 * tol, std::min(1e-3, 0.1 * last));
    double res = 0.0;
    s.z = solve_inner(p, s.z, s.nu, rho, inner_tol, inner_budget, lip, res);
    const Vector r = p.e * s.z - p.rhs;
    s.nu += rho * r;
    score(p, s);
    last = s.kkt();
    if (last < best.kkt()) best = s;
    if (best.kkt() <= tol) break;
    if (p.cost && last < 1e-4) {
      for (double th : {1e-4, 1e-6, 1e-8}) {
        auto pol = polish_lp(p, s, th * std::max(1.0, s.z.lpNorm<Eigen::Infinity>()));
        if (pol && pol->kkt() < best.kkt() && pol->reduced_cost_violation.value_or(0.0) <= tol) best = *pol;
      }
      if (best.kkt() <= tol) break;
    }
    const double feas = r.lpNorm<Eigen::Infinity>();
    if (feas > 0.25 * prev_feas) rho = std::min(rho * 4.0, 1e8);
    prev_feas = feas;
  }
  return best;
}

struct AgentBlock {
  const Objective* objective;
  const MirrorMap* map;
};

struct Lifting {
  Program program;
  Matrix x_of_z;  // x = x_of_z * z
  Index coupling_rows = 0;
};

// Builds the program for agents coupled by coupling * x = coupling_rhs.
// l1 agents become linear programs: on an orthant |x|_1 = 1^T x, elsewhere x = z+ - z-,
// and affine local sets turn into extra equality rows.
inline Lifting lift(const std::vector<AgentBlock>& agents, const Matrix& coupling, const Vector& coupling_rhs) {
  bool linear = true, smooth = true;
  for (const auto& a : agents) {
    linear = linear && a.objective->shape() == ObjectiveShape::L1Norm;
    smooth = smooth && a.objective->is_smooth();
  }
  if (!linear && !smooth) throw UnsupportedError("oracle: nonsmooth objectives other than l1 are not supported");

  Index xdim = 0;
  for (const auto& a : agents) xdim += a.map->dim();
  require_size(coupling.cols(), xdim, "oracle coupling");

  Lifting out;
  Program& p = out.program;
  std::vector<std::pair<Index, Index>> xz;  // (x offset, z offset) per agent
  std::vector<bool> split;
  Index zdim = 0;
  for (const auto& a : agents) {
    const Index n = a.map->dim();
    const auto set = a.map->feasible_set();
    bool sp = false;
    if (linear) {
      const bool orthant = set && std::holds_alternative<OrthantSet>(set->set());
      const bool affine = set && std::holds_alternative<AffineSet>(set->set());
      if (!orthant && !affine && set) throw UnsupportedError("oracle: l1 agent over " + set->describe());
      sp = !orthant;
    }
    split.push_back(sp);
    xz.emplace_back(0, zdim);
    zdim += sp ? 2 * n : n;
  }
  p.dim = zdim;
  out.x_of_z = Matrix::Zero(xdim, zdim);
  std::vector<Matrix> extra_a;
  std::vector<Vector> extra_b;
  Index xoff = 0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const Index n = agents[i].map->dim();
    const Index zoff = xz[i].second;
    xz[i].first = xoff;
    out.x_of_z.block(xoff, zoff, n, n).setIdentity();
    if (split[i]) out.x_of_z.block(xoff, zoff + n, n, n) = -Matrix::Identity(n, n);
    if (linear) {
      const Index w = split[i] ? 2 * n : n;
      p.blocks.push_back({zoff, w, Projector::orthant(w)});
      const auto set = agents[i].map->feasible_set();
      if (set && std::holds_alternative<AffineSet>(set->set())) {
        const auto& aff = std::get<AffineSet>(set->set());
        Matrix rows = Matrix::Zero(aff.a.rows(), zdim);
        rows.block(0, zoff, aff.a.rows(), n) = aff.a;
        rows.block(0, zoff + n, aff.a.rows(), n) = -aff.a;
        extra_a.push_back(rows);
        extra_b.push_back(aff.b);
      }
    } else {
      p.blocks.push_back({zoff, n, agents[i].map->feasible_set()});
    }
    xoff += n;
  }

  Index rows = coupling.rows();
  for (const auto& m : extra_a) rows += m.rows();
  p.e = Matrix::Zero(rows, zdim);
  p.rhs = Vector::Zero(rows);
  p.e.topRows(coupling.rows()) = coupling * out.x_of_z;
  p.rhs.head(coupling.rows()) = coupling_rhs;
  Index r = coupling.rows();
  for (std::size_t k = 0; k < extra_a.size(); ++k) {
    p.e.middleRows(r, extra_a[k].rows()) = extra_a[k];
    p.rhs.segment(r, extra_b[k].size()) = extra_b[k];
    r += extra_a[k].rows();
  }
  out.coupling_rows = coupling.rows();

  if (linear) {
    Vector c = Vector::Ones(zdim);
    p.cost = c;
    p.f = [c](const Vector& z) { return c.dot(z); };
    p.grad = [c](const Vector&) { return c; };
  } else {
    std::vector<Objective> parts;
    for (const auto& a : agents) parts.push_back(*a.objective);
    Objective st = Objective::stack(parts);
    p.f = [st](const Vector& z) { return st.value(z); };
    p.grad = [st](const Vector& z) { return st.gradient(z); };
  }
  return out;
}

struct Solved {
  Vector x, coupling_multiplier;
  ProgramSolution raw;
};

inline Solved run(const std::vector<AgentBlock>& agents, const Matrix& coupling, const Vector& rhs, double tol,
                  const OracleOptions& opt) {
  Lifting lf = lift(agents, coupling, rhs);
  ProgramSolution s = solve(lf.program, tol, opt);
  if (!(s.kkt() <= tol) || (s.reduced_cost_violation && *s.reduced_cost_violation > tol))
    throw OracleError("oracle did not reach the requested KKT tolerance",
                      std::max(s.kkt(), s.reduced_cost_violation.value_or(0.0)));
  return {lf.x_of_z * s.z, s.nu.head(lf.coupling_rows), s};
}

inline std::string method_tag(const ProgramSolution& s) {
  std::string m = s.reduced_cost_violation ? "augmented-lagrangian/lp" : "augmented-lagrangian";
  if (s.polished) m += "+active-set-polish";
  return m;
}

inline double membership(const std::vector<AgentBlock>& agents, const Vector& x) {
  double r = 0.0;
  Index off = 0;
  for (const auto& a : agents) {
    r = std::max(r, a.map->membership_residual(x.segment(off, a.map->dim())));
    off += a.map->dim();
  }
  return r;
}

}  // namespace oracle

inline ReferenceSolution reference_solution(const ConstrainedProblem& p, double tol = 1e-9,
                                            const OracleOptions& opt = {}) {
  p.validate();
  std::vector<oracle::AgentBlock> agents{{&p.objective, &p.mirror}};
  auto s = oracle::run(agents, p.a, p.b, tol, opt);
  ReferenceSolution r;
  r.x = s.x;
  r.lambda = s.coupling_multiplier;
  r.f = p.objective.value(r.x);
  r.kkt_residual = std::max({s.raw.kkt(), (p.a * r.x - p.b).lpNorm<Eigen::Infinity>(),
                             oracle::membership(agents, r.x)});
  r.dual_certificate = s.raw.reduced_cost_violation;
  r.method = oracle::method_tag(s.raw);
  return r;
}

inline ReferenceSolution reference_solution(const ConsensusProblem& p, double tol = 1e-9,
                                            const OracleOptions& opt = {}) {
  p.validate();
  std::vector<oracle::AgentBlock> agents;
  for (std::size_t i = 0; i < p.agents.size(); ++i) agents.push_back({&p.agents[i], &p.mirrors[i]});
  const LiftedLaplacian lap(p.graph, p.block);
  auto s = oracle::run(agents, lap.full(), Vector::Zero(p.dim()), tol, opt);
  ReferenceSolution r;
  r.x = s.x;
  r.lambda = s.coupling_multiplier;
  r.f = stacked_objective(p).value(r.x);
  r.kkt_residual = std::max({s.raw.kkt(), lap.apply(r.x).lpNorm<Eigen::Infinity>(), oracle::membership(agents, r.x)});
  r.dual_certificate = s.raw.reduced_cost_violation;
  r.method = oracle::method_tag(s.raw);
  return r;
}

// Solves the joined problem sum_i A_i x_i = sum_i d_i, then lifts the multiplier mu* to
// lambda* = 1 (x) mu* and picks y* = L^+ (d - A_bar x*) so that A_bar x* - d + L y* = 0.
inline ReferenceSolution reference_solution(const MonotropicProblem& p, double tol = 1e-9,
                                            const OracleOptions& opt = {}) {
  p.validate();
  std::vector<oracle::AgentBlock> agents;
  for (std::size_t i = 0; i < p.agents.size(); ++i) agents.push_back({&p.agents[i], &p.mirrors[i]});
  auto s = oracle::run(agents, p.a_joined(), p.d_sum(), tol, opt);
  const LiftedLaplacian lap(p.graph, p.coupling());
  const Matrix l = lap.full();
  ReferenceSolution r;
  r.x = s.x;
  r.lambda = s.coupling_multiplier.replicate(p.nodes(), 1);
  const Vector resid = p.d() - p.a_bar() * r.x;
  r.y = pseudoinverse(l) * resid;
  r.f = stacked_objective(p).value(r.x);
  const double lifted = (p.a_bar() * r.x - p.d() + l * *r.y).lpNorm<Eigen::Infinity>();
  r.kkt_residual = std::max({s.raw.kkt(), lifted, oracle::membership(agents, r.x)});
  r.dual_certificate = s.raw.reduced_cost_violation;
  r.method = oracle::method_tag(s.raw);
  return r;
}

}  // namespace mirrorflow
