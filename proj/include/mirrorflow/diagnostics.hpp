#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mirrorflow/dynamics.hpp"
#include "mirrorflow/graph.hpp"
#include "mirrorflow/integrator.hpp"
#include "mirrorflow/mirror_maps.hpp"
#include "mirrorflow/oracle.hpp"
#include "mirrorflow/problems.hpp"

namespace mirrorflow {

// ---------------------------------------------------------------------------
// Gaps. All of them use the feasibility of x* to drop the lambda(t) dependence.

// f(x) - f* + lambda*^T (A x - b) + beta/2 |A x - b|^2. lambda does not enter because A x* = b.
inline double lagrangian_gap(const ConstrainedProblem& p, const Vector& x, const Vector& /*lambda*/,
                             const ReferenceSolution& ref, double beta) {
  const Vector r = p.a * x - p.b;
  return p.objective.value(x) - ref.f + ref.lambda.dot(r) + 0.5 * beta * r.squaredNorm();
}

// Same with f replaced by f^(., mu).
inline double smoothed_lagrangian_gap(const ConstrainedProblem& p, const Vector& x, const ReferenceSolution& ref,
                                      double beta, double mu) {
  const Vector r = p.a * x - p.b;
  return p.objective.smoothed_value(x, mu) - p.objective.smoothed_value(ref.x, mu) + ref.lambda.dot(r) +
         0.5 * beta * r.squaredNorm();
}

// f(x) - f* + beta/2 x^T L x + lambda*^T L x
inline double consensus_gap(const ConsensusProblem& p, const Vector& x, const ReferenceSolution& ref, double beta,
                            std::optional<double> mu = std::nullopt) {
  const Objective f = stacked_objective(p);
  const LiftedLaplacian lap(p.graph, p.block);
  const double fx = mu ? f.smoothed_value(x, *mu) - f.smoothed_value(ref.x, *mu) : f.value(x) - ref.f;
  return fx + 0.5 * beta * consensus_residual(p.graph, p.block, x) + ref.lambda.dot(lap.apply(x));
}

// f(x) - f* + lambda*^T A_bar (x - x*) + 1/2 lambda^T L lambda
inline double monotropic_gap(const MonotropicProblem& p, const Vector& x, const Vector& lambda,
                             const ReferenceSolution& ref, std::optional<double> mu = std::nullopt) {
  const Objective f = stacked_objective(p);
  const double fx = mu ? f.smoothed_value(x, *mu) - f.smoothed_value(ref.x, *mu) : f.value(x) - ref.f;
  return fx + ref.lambda.dot(p.a_bar() * (x - ref.x)) + 0.5 * consensus_residual(p.graph, p.coupling(), lambda);
}

// ---------------------------------------------------------------------------
// Lyapunov functions
//   (t^2/alpha^2) (gap + 4 kappa mu) + mirror term + |v - lambda*|^2 / 2 [+ |z - y*|^2 / 2]
// The mirror term is the Fenchel-Young gap psi(x*) + psi*(u) - u^T x*, which equals
// D_{psi*}(u, u*) when u* exists and stays finite for boundary optima of the entropy maps.

struct LyapunovTerms {
  double scaled_gap = 0.0;
  std::vector<double> mirror;      // per block Fenchel-Young gap, +inf where psi(x*) is
  std::vector<double> mirror_raw;  // per block psi*(u) - u^T x*
  double multiplier = 0.0;
  double aux = 0.0;

  double total() const {
    double s = scaled_gap + multiplier + aux;
    for (double m : mirror) s += m;
    return s;
  }
};

namespace detail {
inline void mirror_terms(const MirrorBlocks& maps, const Vector& u, const Vector& xstar, LyapunovTerms& out) {
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& m = maps.map(i);
    const Vector ui = u.segment(maps.offset(i), m.dim());
    const Vector xi = xstar.segment(maps.offset(i), m.dim());
    const double raw = conjugate(m, ui) - ui.dot(xi);
    const double ps = primal(m, xi);
    out.mirror_raw.push_back(raw);
    out.mirror.push_back(ps == kInf ? kInf : ps + raw);
  }
}

inline double smoothing_term(SystemKind s, const SystemParams& prm, double kappa, double t) {
  if (!is_smoothed(s)) return 0.0;
  if (!prm.mu) throw ParameterError("smoothed system needs a mu schedule");
  return 4.0 * kappa * (*prm.mu)(t);
}

inline std::optional<double> mu_for(SystemKind s, const SystemParams& prm, double t) {
  if (!is_smoothed(s)) return std::nullopt;
  return (*prm.mu)(t);
}
}  // namespace detail

inline LyapunovTerms lyapunov_terms(SystemKind s, double t, const PrimalDualState& st, const ConstrainedProblem& p,
                                    const ReferenceSolution& ref, const SystemParams& prm) {
  LyapunovTerms out;
  const double gap = is_smoothed(s) ? smoothed_lagrangian_gap(p, st.x, ref, prm.beta, (*prm.mu)(t))
                                    : lagrangian_gap(p, st.x, st.lambda, ref, prm.beta);
  out.scaled_gap = t * t / (prm.alpha * prm.alpha) *
                   (gap + detail::smoothing_term(s, prm, p.objective.kappa(), t));
  detail::mirror_terms(MirrorBlocks({p.mirror}), st.u, ref.x, out);
  out.multiplier = 0.5 * (st.v - ref.lambda).squaredNorm();
  return out;
}

inline LyapunovTerms lyapunov_terms(SystemKind s, double t, const PrimalDualState& st, const ConsensusProblem& p,
                                    const ReferenceSolution& ref, const SystemParams& prm) {
  LyapunovTerms out;
  const double gap = consensus_gap(p, st.x, ref, prm.beta, detail::mu_for(s, prm, t));
  out.scaled_gap = t * t / (prm.alpha * prm.alpha) *
                   (gap + detail::smoothing_term(s, prm, stacked_objective(p).kappa(), t));
  detail::mirror_terms(MirrorBlocks(p.mirrors), st.u, ref.x, out);
  out.multiplier = 0.5 * (st.v - ref.lambda).squaredNorm();
  return out;
}

inline LyapunovTerms lyapunov_terms(SystemKind s, double t, const PrimalDualState& st, const MonotropicProblem& p,
                                    const ReferenceSolution& ref, const SystemParams& prm) {
  if (!ref.y) throw ParameterError("monotropic reference solution needs y*");
  LyapunovTerms out;
  const double gap = monotropic_gap(p, st.x, st.lambda, ref, detail::mu_for(s, prm, t));
  out.scaled_gap = t * t / (prm.alpha * prm.alpha) *
                   (gap + detail::smoothing_term(s, prm, stacked_objective(p).kappa(), t));
  detail::mirror_terms(MirrorBlocks(p.mirrors), st.u, ref.x, out);
  out.multiplier = 0.5 * (st.v - ref.lambda).squaredNorm();
  if (!st.z) throw SizeError("monotropic state needs z");
  out.aux = 0.5 * (*st.z - *ref.y).squaredNorm();
  return out;
}

inline double lyapunov_apdmd(double t, const PrimalDualState& s, const ConstrainedProblem& p,
                             const ReferenceSolution& ref, const SystemParams& prm) {
  return lyapunov_terms(SystemKind::APDMD, t, s, p, ref, prm).total();
}
inline double lyapunov_sapdmd(double t, const PrimalDualState& s, const ConstrainedProblem& p,
                              const ReferenceSolution& ref, const SystemParams& prm) {
  return lyapunov_terms(SystemKind::SAPDMD, t, s, p, ref, prm).total();
}
inline double lyapunov_adpdmd(double t, const PrimalDualState& s, const ConsensusProblem& p,
                              const ReferenceSolution& ref, const SystemParams& prm) {
  return lyapunov_terms(SystemKind::ADPDMD, t, s, p, ref, prm).total();
}
inline double lyapunov_sadpdmd(double t, const PrimalDualState& s, const ConsensusProblem& p,
                               const ReferenceSolution& ref, const SystemParams& prm) {
  return lyapunov_terms(SystemKind::SADPDMD, t, s, p, ref, prm).total();
}
inline double lyapunov_admd(double t, const PrimalDualState& s, const MonotropicProblem& p,
                            const ReferenceSolution& ref, const SystemParams& prm) {
  return lyapunov_terms(SystemKind::ADMD, t, s, p, ref, prm).total();
}
inline double lyapunov_sadmd(double t, const PrimalDualState& s, const MonotropicProblem& p,
                             const ReferenceSolution& ref, const SystemParams& prm) {
  return lyapunov_terms(SystemKind::SADMD, t, s, p, ref, prm).total();
}

// ---------------------------------------------------------------------------
// Rate fit

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t used = 0;
  std::size_t clipped = 0;
};

// Least squares slope of log(value) against log(t), skipping the first 20% of the log-time range.
inline RateFit rate_fit(const std::vector<double>& times, const std::vector<double>& values) {
  if (times.size() != values.size()) throw SizeError("rate_fit: times and values differ in length");
  if (times.size() < 10) throw ParameterError("rate_fit: need at least 10 samples");
  if (!(times.front() > 0.0)) throw DomainError("rate_fit: times must be positive");
  const double l0 = std::log(times.front()), l1 = std::log(times.back());
  const double cut = l0 + 0.2 * (l1 - l0);
  RateFit out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double lt = std::log(times[i]);
    if (lt < cut) continue;
    double v = values[i];
    if (!(v > 0.0)) {
      v = 1e-16;
      ++out.clipped;
    }
    const double lv = std::log(std::max(v, 1e-16));
    sx += lt;
    sy += lv;
    sxx += lt * lt;
    sxy += lt * lv;
    ++out.used;
  }
  if (out.used < 2) throw ParameterError("rate_fit: fewer than 2 samples in the fit window");
  const double n = static_cast<double>(out.used);
  const double den = n * sxx - sx * sx;
  if (den <= 0.0) throw ParameterError("rate_fit: degenerate time samples");
  out.slope = (n * sxy - sx * sy) / den;
  out.intercept = (sy - out.slope * sx) / n;
  return out;
}

// ---------------------------------------------------------------------------
// Run report and bound checks

enum class FeasibilityKind { ResidualNorm, ConsensusForm, MultiplierConsensusForm };

struct RunReport {
  SystemKind system = SystemKind::APDMD;
  FeasibilityKind feasibility_kind = FeasibilityKind::ResidualNorm;
  std::vector<double> times;
  std::vector<double> primal_gap;       // |f(x) - f*|
  std::vector<double> signed_primal;    // f(x) - f*
  std::vector<double> lagrangian_gap;   // gap of the system, smoothed for smoothed systems
  std::vector<double> bound_gap;        // lagrangian_gap + 4 kappa mu
  std::vector<double> feasibility;      // |Ax - b|, x^T L x or lambda^T L lambda
  std::vector<double> residual_norm;    // |Ax - b| or |L x|, for the residual direction bound
  std::vector<double> lyapunov;
  std::vector<double> mu;
  std::vector<double> x_norm, lambda_norm;
  std::vector<double> membership;       // set membership violation of x
  std::vector<double> residual_direction_v0;  // V(t0) evaluated with lambda* = r(t)/|r(t)|
  double v0 = 0.0;
  bool anchored_mirror_term = false;
  bool exponent_clamped = false;
  std::vector<std::string> warnings;
};

namespace detail {

// Fills the Lyapunov column. Blocks with psi(x*) = +inf use psi*(u) - u^T x* shifted by its
// minimum over the samples: the time derivative is unchanged, so monotonicity and the bound
// over the sampled horizon still hold, but the value is only meaningful relative to the run.
inline void assemble_lyapunov(RunReport& rep, const std::vector<LyapunovTerms>& terms) {
  const std::size_t nb = terms.front().mirror.size();
  std::vector<double> anchor(nb, 0.0);
  std::vector<bool> anchored(nb, false);
  for (std::size_t b = 0; b < nb; ++b) {
    for (const auto& t : terms)
      if (t.mirror[b] == kInf) anchored[b] = true;
    if (anchored[b]) {
      double mn = kInf;
      for (const auto& t : terms) mn = std::min(mn, t.mirror_raw[b]);
      anchor[b] = mn;
      rep.anchored_mirror_term = true;
    }
  }
  for (const auto& t : terms) {
    double v = t.scaled_gap + t.multiplier + t.aux;
    for (std::size_t b = 0; b < nb; ++b) v += anchored[b] ? t.mirror_raw[b] - anchor[b] : t.mirror[b];
    rep.lyapunov.push_back(v);
  }
  rep.v0 = rep.lyapunov.front();
  if (rep.anchored_mirror_term)
    rep.warnings.push_back("mirror term anchored at its sampled minimum: psi(x*) is infinite for some block");
}

template <class Problem>
void fill_common(RunReport& rep, SystemKind sys, const Trajectory& tr, const StateLayout& l, const Problem& p,
                 const ReferenceSolution& ref, const SystemParams& prm, const Objective& f, const MirrorBlocks& maps) {
  rep.system = sys;
  rep.times = tr.times;
  rep.exponent_clamped = tr.exponent_clamped;
  if (tr.exponent_clamped) rep.warnings.push_back("entropy exponent clamped during integration");
  std::vector<LyapunovTerms> terms;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.times[k];
    const auto st = unpack(l, tr.states[k]);
    const double fx = f.value(st.x) - ref.f;
    rep.signed_primal.push_back(fx);
    rep.primal_gap.push_back(std::abs(fx));
    const double mu = is_smoothed(sys) ? (*prm.mu)(t) : 0.0;
    rep.mu.push_back(mu);
    rep.x_norm.push_back(st.x.norm());
    rep.lambda_norm.push_back(st.lambda.norm());
    rep.membership.push_back(maps.membership_residual(st.x));
    auto lt = lyapunov_terms(sys, t, st, p, ref, prm);
    const double bg = lt.scaled_gap * prm.alpha * prm.alpha / (t * t);
    const double sm = is_smoothed(sys) ? 4.0 * f.kappa() * mu : 0.0;
    rep.bound_gap.push_back(bg);
    rep.lagrangian_gap.push_back(bg - sm);
    terms.push_back(std::move(lt));
  }
  assemble_lyapunov(rep, terms);
}

}  // namespace detail

inline RunReport evaluate_run(SystemKind sys, const Trajectory& tr, const ConstrainedProblem& p,
                              const ReferenceSolution& ref, const SystemParams& prm) {
  if (tr.size() == 0) throw ParameterError("evaluate_run: empty trajectory");
  RunReport rep;
  rep.feasibility_kind = FeasibilityKind::ResidualNorm;
  const StateLayout l{p.dim(), p.rows(), 0};
  detail::fill_common(rep, sys, tr, l, p, ref, prm, p.objective, MirrorBlocks({p.mirror}));
  const auto s0 = unpack(l, tr.states.front());
  const double t0 = tr.times.front();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto st = unpack(l, tr.states[k]);
    const Vector r = p.a * st.x - p.b;
    rep.feasibility.push_back(r.norm());
    rep.residual_norm.push_back(r.norm());
    // V(t0) with lambda* replaced by the unit residual direction at t
    ReferenceSolution dir = ref;
    dir.lambda = r.norm() > 0.0 ? Vector(r / r.norm()) : Vector(Vector::Zero(r.size()));
    auto lt = lyapunov_terms(sys, t0, s0, p, dir, prm);
    rep.residual_direction_v0.push_back(lt.total());
  }
  return rep;
}

inline RunReport evaluate_run(SystemKind sys, const Trajectory& tr, const ConsensusProblem& p,
                              const ReferenceSolution& ref, const SystemParams& prm) {
  if (tr.size() == 0) throw ParameterError("evaluate_run: empty trajectory");
  RunReport rep;
  rep.feasibility_kind = FeasibilityKind::ConsensusForm;
  const StateLayout l{p.dim(), p.dim(), 0};
  const Objective f = stacked_objective(p);
  detail::fill_common(rep, sys, tr, l, p, ref, prm, f, MirrorBlocks(p.mirrors));
  const LiftedLaplacian lap(p.graph, p.block);
  const auto s0 = unpack(l, tr.states.front());
  const double t0 = tr.times.front();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto st = unpack(l, tr.states[k]);
    rep.feasibility.push_back(consensus_residual(p.graph, p.block, st.x));
    const Vector r = lap.apply(st.x);
    rep.residual_norm.push_back(r.norm());
    ReferenceSolution dir = ref;
    dir.lambda = r.norm() > 0.0 ? Vector(r / r.norm()) : Vector(Vector::Zero(r.size()));
    rep.residual_direction_v0.push_back(lyapunov_terms(sys, t0, s0, p, dir, prm).total());
  }
  return rep;
}

inline RunReport evaluate_run(SystemKind sys, const Trajectory& tr, const MonotropicProblem& p,
                              const ReferenceSolution& ref, const SystemParams& prm) {
  if (tr.size() == 0) throw ParameterError("evaluate_run: empty trajectory");
  RunReport rep;
  rep.feasibility_kind = FeasibilityKind::MultiplierConsensusForm;
  const StateLayout l{p.dim(), p.dual_dim(), p.dual_dim()};
  const Objective f = stacked_objective(p);
  detail::fill_common(rep, sys, tr, l, p, ref, prm, f, MirrorBlocks(p.mirrors));
  const Matrix a = p.a_joined();
  const Vector d = p.d_sum();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto st = unpack(l, tr.states[k]);
    rep.feasibility.push_back(consensus_residual(p.graph, p.coupling(), st.lambda));
    rep.residual_norm.push_back((a * st.x - d).norm());
  }
  return rep;
}

struct BoundCheck {
  double slack = 1.05;
  double gap_ratio_max = 0.0;          // bound_gap / (alpha^2 V0 / t^2)
  double feasibility_ratio_max = 0.0;  // against 2 alpha^2 V0 / (beta t^2), on the norm for |Ax - b|
  double final_feasibility_ratio = 0.0;
  double lyapunov_max_increase = 0.0;  // max of V(k+1) - V(k)(1 + 1e-6) - 1e-10
  double saddle_min = 0.0;             // min of bound_gap, should be >= -1e-8
  double residual_direction_ratio_max = 0.0;
  double lower_bound_ratio_max = 0.0;
  double integral_growth_last_decade = 0.0;
  double membership_max = 0.0;
  bool gap_ok = false, feasibility_ok = false, final_feasibility_ok = false, lyapunov_ok = false,
       saddle_ok = false;
  // the residual direction, lower and integral bounds are informational
  bool residual_direction_ok = false, lower_bound_ok = false, integral_plateau = false;

  bool passed() const { return gap_ok && feasibility_ok && lyapunov_ok && saddle_ok; }
};

inline BoundCheck check_bounds(const RunReport& rep, const SystemParams& prm, double v0, double slack = 1.05) {
  BoundCheck bc;
  bc.slack = slack;
  const double a2 = prm.alpha * prm.alpha;
  const double beta = rep.system == SystemKind::ADMD || rep.system == SystemKind::SADMD ? 1.0 : prm.beta;
  const std::size_t n = rep.times.size();
  bc.gap_ok = bc.feasibility_ok = bc.lyapunov_ok = bc.saddle_ok = true;
  bc.residual_direction_ok = bc.lower_bound_ok = true;
  bc.saddle_min = kInf;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = rep.times[k];
    const double gb = a2 * v0 / (t * t);
    bc.gap_ratio_max = std::max(bc.gap_ratio_max, rep.bound_gap[k] / gb);
    if (rep.bound_gap[k] > slack * gb + 1e-10) bc.gap_ok = false;

    double obs, bound;
    if (rep.feasibility_kind == FeasibilityKind::ResidualNorm) {
      obs = rep.feasibility[k];
      bound = std::sqrt(2.0 * a2 * v0 / beta) / t;
    } else {
      obs = rep.feasibility[k];
      bound = 2.0 * a2 * v0 / (beta * t * t);
    }
    const double ratio = obs / bound;
    bc.feasibility_ratio_max = std::max(bc.feasibility_ratio_max, ratio);
    if (obs > slack * bound + 1e-10) bc.feasibility_ok = false;
    if (k + 1 == n) {
      bc.final_feasibility_ratio = ratio;
      bc.final_feasibility_ok = obs <= slack * bound + 1e-10;
    }

    bc.saddle_min = std::min(bc.saddle_min, rep.bound_gap[k]);
    if (k > 0) {
      const double inc = rep.lyapunov[k] - rep.lyapunov[k - 1] * (1.0 + 1e-6) - 1e-10;
      bc.lyapunov_max_increase = std::max(bc.lyapunov_max_increase, inc);
      if (inc > 0.0) bc.lyapunov_ok = false;
    }
    bc.membership_max = std::max(bc.membership_max, rep.membership[k]);

    if (!rep.residual_direction_v0.empty()) {
      double lhs = rep.signed_primal[k] + rep.residual_norm[k];
      if (rep.system == SystemKind::APDMD || rep.system == SystemKind::APDPD)
        lhs += 0.5 * beta * rep.residual_norm[k] * rep.residual_norm[k];
      const double rb = a2 * rep.residual_direction_v0[k] / (t * t);
      bc.residual_direction_ratio_max = std::max(bc.residual_direction_ratio_max, lhs / rb);
      if (lhs > slack * rb + 1e-10) bc.residual_direction_ok = false;
    }
    const double lower = (rep.system == SystemKind::APDMD || rep.system == SystemKind::APDPD)
                             ? prm.alpha * std::sqrt(v0) / t
                             : prm.alpha * std::sqrt(2.0 * v0 / beta) / t;
    const double lr = -rep.signed_primal[k] / lower;
    bc.lower_bound_ratio_max = std::max(bc.lower_bound_ratio_max, lr);
    if (-rep.signed_primal[k] > slack * lower + 1e-10) bc.lower_bound_ok = false;
  }
  if (bc.saddle_min < -1e-8) bc.saddle_ok = false;

  // partial trapezoid integral of t * bound_gap; growth over the last decade
  std::vector<double> cum(n, 0.0);
  for (std::size_t k = 1; k < n; ++k)
    cum[k] = cum[k - 1] + 0.5 * (rep.times[k] - rep.times[k - 1]) *
                              (rep.times[k] * rep.bound_gap[k] + rep.times[k - 1] * rep.bound_gap[k - 1]);
  if (n > 1) {
    const double t_end = rep.times.back();
    std::size_t j = 0;
    while (j + 1 < n && rep.times[j] < t_end / 10.0) ++j;
    const double total = cum.back();
    bc.integral_growth_last_decade = total > 0.0 ? (total - cum[j]) / total : 0.0;
    bc.integral_plateau = bc.integral_growth_last_decade <= 0.05;
  }
  return bc;
}

}  // namespace mirrorflow
