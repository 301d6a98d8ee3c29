#pragma once

#include <functional>
#include <optional>
#include <string>

#include "mirrorflow/graph.hpp"
#include "mirrorflow/mirror_maps.hpp"
#include "mirrorflow/numerics.hpp"
#include "mirrorflow/problems.hpp"
#include "mirrorflow/smoothing.hpp"

namespace mirrorflow {

enum class SystemKind { APDMD, APDPD, ADPDMD, ADMD, SAPDMD, SADPDMD, SADMD };

inline const char* to_string(SystemKind s) {
  switch (s) {
    case SystemKind::APDMD: return "apdmd";
    case SystemKind::APDPD: return "apdpd";
    case SystemKind::ADPDMD: return "adpdmd";
    case SystemKind::ADMD: return "admd";
    case SystemKind::SAPDMD: return "sapdmd";
    case SystemKind::SADPDMD: return "sadpdmd";
    case SystemKind::SADMD: return "sadmd";
  }
  return "?";
}

inline bool is_smoothed(SystemKind s) {
  return s == SystemKind::SAPDMD || s == SystemKind::SADPDMD || s == SystemKind::SADMD;
}

struct SystemParams {
  double alpha = 3.0;
  double beta = 1.0;
  double t0 = 1.0;
  std::optional<MuSchedule> mu;

  void validate() const {
    if (!(alpha >= 2.0)) throw ParameterError("alpha must be >= 2, got " + std::to_string(alpha));
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be >= 0");
    if (!(t0 > 0.0)) throw ParameterError("t0 must be positive");
    if (mu) {
      if (mu->alpha() < alpha)
        throw ParameterError("mu schedule decays slower than t^{-2 alpha}");
      if (mu->t0() > t0) throw ParameterError("mu schedule starts after t0");
      if (t0 < 1.0 && mu->alpha() != alpha)
        throw ParameterError("mu schedule exponent must equal alpha when t0 < 1");
    }
  }
};

// Flat state [x, u, lambda, v, y, z]; the second order form stores [x, x', lambda, lambda'].
struct StateLayout {
  Index n = 0;    // primal dimension
  Index m = 0;    // multiplier dimension
  Index aux = 0;  // y and z dimension, monotropic problems only

  Index size() const { return 2 * n + 2 * m + 2 * aux; }
  Index x() const { return 0; }
  Index u() const { return n; }
  Index lambda() const { return 2 * n; }
  Index v() const { return 2 * n + m; }
  Index y() const { return 2 * n + 2 * m; }
  Index z() const { return 2 * n + 2 * m + aux; }
};

struct PrimalDualState {
  Vector x, u, lambda, v;
  std::optional<Vector> y, z;
};

inline Vector pack(const StateLayout& l, const PrimalDualState& s) {
  require_size(s.x.size(), l.n, "state x");
  require_size(s.u.size(), l.n, "state u");
  require_size(s.lambda.size(), l.m, "state lambda");
  require_size(s.v.size(), l.m, "state v");
  Vector out(l.size());
  out.segment(l.x(), l.n) = s.x;
  out.segment(l.u(), l.n) = s.u;
  out.segment(l.lambda(), l.m) = s.lambda;
  out.segment(l.v(), l.m) = s.v;
  if (l.aux) {
    if (!s.y || !s.z) throw SizeError("state: auxiliary blocks missing");
    require_size(s.y->size(), l.aux, "state y");
    require_size(s.z->size(), l.aux, "state z");
    out.segment(l.y(), l.aux) = *s.y;
    out.segment(l.z(), l.aux) = *s.z;
  }
  return out;
}

inline PrimalDualState unpack(const StateLayout& l, const Vector& y) {
  require_size(y.size(), l.size(), "packed state");
  PrimalDualState s{y.segment(l.x(), l.n), y.segment(l.u(), l.n), y.segment(l.lambda(), l.m),
                    y.segment(l.v(), l.m), std::nullopt, std::nullopt};
  if (l.aux) {
    s.y = y.segment(l.y(), l.aux);
    s.z = y.segment(l.z(), l.aux);
  }
  return s;
}

struct FieldFlags {
  bool exponent_clamped = false;
};

class VectorField {
 public:
  using Eval = std::function<void(double, const Vector&, Vector&, FieldFlags&)>;

  VectorField(std::string name, StateLayout layout, Eval eval)
      : name_(std::move(name)), layout_(layout), eval_(std::move(eval)) {}

  const std::string& name() const { return name_; }
  const StateLayout& layout() const { return layout_; }
  Index dim() const { return layout_.size(); }

  void eval(double t, const Vector& y, Vector& dy, FieldFlags& flags) const {
    if (!(t > 0.0)) throw DomainError("vector field evaluated at t = " + std::to_string(t) + " <= 0");
    require_size(y.size(), dim(), name_ + " state");
    dy.resize(dim());
    eval_(t, y, dy, flags);
  }

  Vector operator()(double t, const Vector& y) const {
    Vector dy;
    FieldFlags f;
    eval(t, y, dy, f);
    return dy;
  }

 private:
  std::string name_;
  StateLayout layout_;
  Eval eval_;
};

namespace detail {

using GradAt = std::function<Vector(double, const Vector&)>;

inline GradAt gradient_source(const Objective& obj, const SystemParams& p, bool smoothed) {
  if (smoothed) {
    if (!p.mu) throw ParameterError("smoothed system needs a mu schedule");
    const MuSchedule mu = *p.mu;
    return [obj, mu](double t, const Vector& x) { return obj.smoothed_gradient(x, mu(t)); };
  }
  if (!obj.is_smooth()) throw UnsupportedError("nonsmooth objective needs the smoothed system");
  return [obj](double, const Vector& x) { return obj.gradient(x); };
}

// x' = (alpha/t)(p - x), u' = -(t/alpha)(g + beta A^T r + A^T v), lambda' = (alpha/t)(v - lambda),
// v' = (t/alpha)(A p - b) with p = grad psi*(u), r = A x - b.
inline VectorField centralized(std::string name, const Matrix& a, const Vector& b, MirrorBlocks maps, GradAt grad,
                               const SystemParams& prm) {
  StateLayout l{a.cols(), a.rows(), 0};
  const double al = prm.alpha, be = prm.beta;
  return VectorField(std::move(name), l,
                     [=](double t, const Vector& y, Vector& dy, FieldFlags& fl) {
                       const auto x = y.segment(l.x(), l.n);
                       const auto u = y.segment(l.u(), l.n);
                       const auto lam = y.segment(l.lambda(), l.m);
                       const auto v = y.segment(l.v(), l.m);
                       const Vector p = maps.grad_conjugate(u, &fl.exponent_clamped);
                       const Vector g = grad(t, x);
                       const Vector r = a * x - b;
                       dy.segment(l.x(), l.n) = (al / t) * (p - x);
                       dy.segment(l.u(), l.n) = -(t / al) * (g + a.transpose() * (be * r + v));
                       dy.segment(l.lambda(), l.m) = (al / t) * (v - lam);
                       dy.segment(l.v(), l.m) = (t / al) * (a * p - b);
                     });
}

// u' = -(t/alpha)(g + beta L x + L v), v' = (t/alpha) L p
inline VectorField consensus(std::string name, const LiftedLaplacian& lap, MirrorBlocks maps, GradAt grad,
                             const SystemParams& prm) {
  StateLayout l{lap.dim(), lap.dim(), 0};
  const double al = prm.alpha, be = prm.beta;
  return VectorField(std::move(name), l,
                     [=](double t, const Vector& y, Vector& dy, FieldFlags& fl) {
                       const Vector x = y.segment(l.x(), l.n);
                       const auto u = y.segment(l.u(), l.n);
                       const auto lam = y.segment(l.lambda(), l.m);
                       const Vector v = y.segment(l.v(), l.m);
                       const Vector p = maps.grad_conjugate(u, &fl.exponent_clamped);
                       const Vector g = grad(t, x);
                       dy.segment(l.x(), l.n) = (al / t) * (p - x);
                       dy.segment(l.u(), l.n) = -(t / al) * (g + lap.apply(be * x + v));
                       dy.segment(l.lambda(), l.m) = (al / t) * (v - lam);
                       dy.segment(l.v(), l.m) = (t / al) * lap.apply(p);
                     });
}

// u' = -(t/alpha)(g + Abar^T v), v' = (t/alpha)(Abar p - d - L lambda + L z),
// y' = (alpha/t)(z - y), z' = -(t/alpha) L v
inline VectorField monotropic(std::string name, const Matrix& abar, const Vector& d, const LiftedLaplacian& lap,
                              MirrorBlocks maps, GradAt grad, const SystemParams& prm) {
  StateLayout l{abar.cols(), abar.rows(), abar.rows()};
  const double al = prm.alpha;
  return VectorField(std::move(name), l,
                     [=](double t, const Vector& y, Vector& dy, FieldFlags& fl) {
                       const auto x = y.segment(l.x(), l.n);
                       const auto u = y.segment(l.u(), l.n);
                       const Vector lam = y.segment(l.lambda(), l.m);
                       const Vector v = y.segment(l.v(), l.m);
                       const auto yy = y.segment(l.y(), l.aux);
                       const Vector z = y.segment(l.z(), l.aux);
                       const Vector p = maps.grad_conjugate(u, &fl.exponent_clamped);
                       const Vector g = grad(t, x);
                       dy.segment(l.x(), l.n) = (al / t) * (p - x);
                       dy.segment(l.u(), l.n) = -(t / al) * (g + abar.transpose() * v);
                       dy.segment(l.lambda(), l.m) = (al / t) * (v - lam);
                       dy.segment(l.v(), l.m) = (t / al) * (abar * p - d + lap.apply(z - lam));
                       dy.segment(l.y(), l.aux) = (al / t) * (z - yy);
                       dy.segment(l.z(), l.aux) = -(t / al) * lap.apply(v);
                     });
}

}  // namespace detail

inline VectorField apdmd_field(const ConstrainedProblem& p, const SystemParams& prm) {
  p.validate();
  prm.validate();
  return detail::centralized("apdmd", p.a, p.b, MirrorBlocks({p.mirror}),
                             detail::gradient_source(p.objective, prm, false), prm);
}

// The same flow with a projection map, grad psi* = P_X.
inline VectorField apdpd_field(const ConstrainedProblem& p, const SystemParams& prm) {
  if (p.mirror.kind() != MapKind::Projection) throw UnsupportedError("apdpd needs a projection map");
  p.validate();
  prm.validate();
  return detail::centralized("apdpd", p.a, p.b, MirrorBlocks({p.mirror}),
                             detail::gradient_source(p.objective, prm, false), prm);
}

inline VectorField sapdmd_field(const ConstrainedProblem& p, const SystemParams& prm) {
  p.validate();
  prm.validate();
  return detail::centralized("sapdmd", p.a, p.b, MirrorBlocks({p.mirror}),
                             detail::gradient_source(p.objective, prm, true), prm);
}

inline VectorField adpdmd_field(const ConsensusProblem& p, const SystemParams& prm) {
  p.validate();
  prm.validate();
  return detail::consensus("adpdmd", LiftedLaplacian(p.graph, p.block), MirrorBlocks(p.mirrors),
                           detail::gradient_source(stacked_objective(p), prm, false), prm);
}

inline VectorField sadpdmd_field(const ConsensusProblem& p, const SystemParams& prm) {
  p.validate();
  prm.validate();
  return detail::consensus("sadpdmd", LiftedLaplacian(p.graph, p.block), MirrorBlocks(p.mirrors),
                           detail::gradient_source(stacked_objective(p), prm, true), prm);
}

namespace detail {
inline SystemParams with_unit_beta(SystemParams prm) {
  prm.beta = 1.0;
  return prm;
}
}  // namespace detail

// beta plays no role in the monotropic flow; it is pinned to 1.
inline VectorField admd_field(const MonotropicProblem& p, const SystemParams& prm_in) {
  const SystemParams prm = detail::with_unit_beta(prm_in);
  p.validate();
  prm.validate();
  return detail::monotropic("admd", p.a_bar(), p.d(), LiftedLaplacian(p.graph, p.coupling()),
                            MirrorBlocks(p.mirrors), detail::gradient_source(stacked_objective(p), prm, false), prm);
}

inline VectorField sadmd_field(const MonotropicProblem& p, const SystemParams& prm_in) {
  const SystemParams prm = detail::with_unit_beta(prm_in);
  p.validate();
  prm.validate();
  return detail::monotropic("sadmd", p.a_bar(), p.d(), LiftedLaplacian(p.graph, p.coupling()),
                            MirrorBlocks(p.mirrors), detail::gradient_source(stacked_objective(p), prm, true), prm);
}

// Second order form in (x, x', lambda, lambda'):
//   x''      = -((alpha+1)/t) x' - H (grad f(x) + beta A^T (A x - b) + A^T (lambda + (t/alpha) lambda'))
//   lambda'' = -((alpha+1)/t) lambda' + A (x + (t/alpha) x') - b
// with H the Hessian of psi* at grad psi(x + (t/alpha) x').
inline VectorField apdmd_second_order_field(const ConstrainedProblem& p, const SystemParams& prm) {
  p.validate();
  prm.validate();
  if (p.mirror.kind() == MapKind::Projection)
    throw UnsupportedError("second order form needs a differentiable mirror map");
  const auto grad = detail::gradient_source(p.objective, prm, false);
  StateLayout l{p.dim(), p.rows(), 0};
  const double al = prm.alpha, be = prm.beta;
  const Matrix a = p.a;
  const Vector b = p.b;
  const MirrorMap map = p.mirror;
  return VectorField("apdmd_second_order", l, [=](double t, const Vector& y, Vector& dy, FieldFlags&) {
    const auto x = y.segment(l.x(), l.n);
    const auto xd = y.segment(l.u(), l.n);
    const auto lam = y.segment(l.lambda(), l.m);
    const auto ld = y.segment(l.v(), l.m);
    const Vector w = x + (t / al) * xd;
    const Matrix h = hessian_conjugate(map, grad_primal(map, w));
    const Vector g = grad(t, x) + a.transpose() * (be * (a * x - b) + lam + (t / al) * ld);
    dy.segment(l.x(), l.n) = xd;
    dy.segment(l.u(), l.n) = -((al + 1.0) / t) * xd - h * g;
    dy.segment(l.lambda(), l.m) = ld;
    dy.segment(l.v(), l.m) = -((al + 1.0) / t) * ld + a * w - b;
  });
}

// ---------------------------------------------------------------------------
// Initial states: u0 per map from the problem's start point, x0 = grad psi*(u0), multipliers 0.

inline Vector initial_dual(const MirrorMap& m, const Vector& start) {
  switch (m.kind()) {
    case MapKind::Euclidean:
    case MapKind::SimplexEntropy: return Vector::Zero(m.dim());
    case MapKind::NegEntropy: return dual_point_for(m, start);
    case MapKind::ItakuraSaito: return dual_point_for(m, start);
    case MapKind::Projection: return start;
  }
  throw UnsupportedError("initial_dual: unknown map");
}

inline Vector initial_dual(const MirrorBlocks& maps, const Vector& start) {
  Vector u(maps.dim());
  for (std::size_t i = 0; i < maps.size(); ++i)
    u.segment(maps.offset(i), maps.map(i).dim()) =
        initial_dual(maps.map(i), start.segment(maps.offset(i), maps.map(i).dim()));
  return u;
}

namespace detail {
inline PrimalDualState start_state(const MirrorBlocks& maps, const Vector& start, Index m, Index aux) {
  PrimalDualState s;
  s.u = initial_dual(maps, start);
  s.x = maps.grad_conjugate(s.u);
  s.lambda = Vector::Zero(m);
  s.v = Vector::Zero(m);
  if (aux) {
    s.y = Vector::Zero(aux);
    s.z = Vector::Zero(aux);
  }
  return s;
}
}  // namespace detail

inline PrimalDualState initial_state(const ConstrainedProblem& p) {
  return detail::start_state(MirrorBlocks({p.mirror}), p.start, p.rows(), 0);
}
inline PrimalDualState initial_state(const ConsensusProblem& p) {
  return detail::start_state(MirrorBlocks(p.mirrors), p.start, p.dim(), 0);
}
inline PrimalDualState initial_state(const MonotropicProblem& p) {
  return detail::start_state(MirrorBlocks(p.mirrors), p.start, p.dual_dim(), p.dual_dim());
}

// First order state -> (x, x', lambda, lambda') at time t.
inline Vector to_second_order(const StateLayout& l, const MirrorMap& map, double t, double alpha, const Vector& y) {
  const auto s = unpack(l, y);
  PrimalDualState o{s.x, (alpha / t) * (grad_conjugate(map, s.u) - s.x), s.lambda, (alpha / t) * (s.v - s.lambda),
                    std::nullopt, std::nullopt};
  return pack(l, o);
}

}  // namespace mirrorflow
