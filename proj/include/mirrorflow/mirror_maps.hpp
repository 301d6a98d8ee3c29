#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mirrorflow/numerics.hpp"
#include "mirrorflow/projections.hpp"

namespace mirrorflow {

enum class MapKind { Euclidean, NegEntropy, ItakuraSaito, SimplexEntropy, Projection };

inline const char* to_string(MapKind k) {
  switch (k) {
    case MapKind::Euclidean: return "euclidean";
    case MapKind::NegEntropy: return "neg_entropy";
    case MapKind::ItakuraSaito: return "itakura_saito";
    case MapKind::SimplexEntropy: return "simplex_entropy";
    case MapKind::Projection: return "projection";
  }
  return "?";
}

// Exponents of the entropy map are clamped here before exp().
inline constexpr double kExpClamp = 500.0;

// Strongly convex distance generating function psi on a set X, handled through its conjugate.
//   Euclidean      psi = |x|^2 / 2
//   NegEntropy     psi = sum x log x            on x >= 0
//   ItakuraSaito   psi = -sum log x             on x > 0
//   SimplexEntropy psi = sum x log x            on the unit simplex
//   Projection     psi = |x|^2 / 2 + indicator  on a projectable set
class MirrorMap {
 public:
  static MirrorMap euclidean(Index n) { return MirrorMap(MapKind::Euclidean, n); }
  static MirrorMap negative_entropy(Index n) { return MirrorMap(MapKind::NegEntropy, n); }
  static MirrorMap itakura_saito(Index n) { return MirrorMap(MapKind::ItakuraSaito, n); }
  static MirrorMap simplex_entropy(Index n) { return MirrorMap(MapKind::SimplexEntropy, n); }
  static MirrorMap projection(Projector p) {
    MirrorMap m(MapKind::Projection, p.dim());
    m.projector_ = std::move(p);
    return m;
  }

  MapKind kind() const { return kind_; }
  Index dim() const { return n_; }
  const std::optional<Projector>& projector() const { return projector_; }

  std::string describe() const {
    std::string s = to_string(kind_);
    if (projector_) s += "(" + projector_->describe() + ")";
    return s;
  }

  // Closed convex set the primal iterate lives in, or nullopt for all of R^n.
  std::optional<Projector> feasible_set() const {
    switch (kind_) {
      case MapKind::Euclidean: return std::nullopt;
      case MapKind::NegEntropy:
      case MapKind::ItakuraSaito: return Projector::orthant(n_);
      case MapKind::SimplexEntropy: return Projector::simplex(n_);
      case MapKind::Projection: return projector_;
    }
    return std::nullopt;
  }

  double membership_residual(const Vector& x) const {
    auto s = feasible_set();
    return s ? s->membership_residual(x) : 0.0;
  }

 private:
  MirrorMap(MapKind k, Index n) : kind_(k), n_(n) {
    if (n < 1) throw SizeError("mirror map: dimension < 1");
  }

  MapKind kind_;
  Index n_;
  std::optional<Projector> projector_;
};

namespace detail {
inline void check_arg(const MirrorMap& m, const Vector& u, const char* what) {
  require_size(u.size(), m.dim(), what);
  if (!u.allFinite()) throw NumericError(std::string(what) + ": non-finite argument");
}
inline void require_negative(const Vector& u) {
  for (Index i = 0; i < u.size(); ++i)
    if (!(u(i) < 0.0))
      throw DomainError("itakura_saito: dual coordinate " + std::to_string(i) +
                        " must be negative, got " + std::to_string(u(i)));
}
inline Vector softmax(const Vector& u) {
  const double m = u.maxCoeff();
  Vector e = (u.array() - m).exp().matrix();
  return e / e.sum();
}
inline double logsumexp(const Vector& u) {
  const double m = u.maxCoeff();
  return m + std::log((u.array() - m).exp().sum());
}
}  // namespace detail

// grad psi*(u), the primal point of a dual state. If clamped is given it is set when
// any entropy exponent hit kExpClamp.
inline Vector grad_conjugate(const MirrorMap& m, const Vector& u, bool* clamped = nullptr) {
  detail::check_arg(m, u, "grad_conjugate");
  switch (m.kind()) {
    case MapKind::Euclidean: return u;
    case MapKind::NegEntropy: {
      Vector e(u.size());
      bool hit = false;
      for (Index i = 0; i < u.size(); ++i) {
        double z = u(i) - 1.0;
        if (z > kExpClamp) {
          z = kExpClamp;
          hit = true;
        }
        e(i) = std::exp(z);
      }
      if (clamped && hit) *clamped = true;
      if (!e.allFinite()) throw NumericError("neg_entropy: overflow");
      return e;
    }
    case MapKind::ItakuraSaito:
      detail::require_negative(u);
      return (-u.array().inverse()).matrix();
    case MapKind::SimplexEntropy: return detail::softmax(u);
    case MapKind::Projection: return m.projector()->project(u);
  }
  throw UnsupportedError("grad_conjugate: unknown map");
}

// psi*(u)
inline double conjugate(const MirrorMap& m, const Vector& u) {
  detail::check_arg(m, u, "conjugate");
  switch (m.kind()) {
    case MapKind::Euclidean: return 0.5 * u.squaredNorm();
    case MapKind::NegEntropy:
      return (u.array() - 1.0).min(kExpClamp).exp().sum();
    case MapKind::ItakuraSaito:
      detail::require_negative(u);
      return -(1.0 + (-u.array()).log()).sum();
    case MapKind::SimplexEntropy: return detail::logsumexp(u);
    case MapKind::Projection: {
      const Vector p = m.projector()->project(u);
      return 0.5 * (u.squaredNorm() - (u - p).squaredNorm());
    }
  }
  throw UnsupportedError("conjugate: unknown map");
}

// psi(x), +inf outside the domain.
inline double primal(const MirrorMap& m, const Vector& x) {
  detail::check_arg(m, x, "primal");
  auto xlogx = [](const Vector& v) {
    double s = 0.0;
    for (Index i = 0; i < v.size(); ++i) {
      if (v(i) < 0.0) return kInf;
      if (v(i) > 0.0) s += v(i) * std::log(v(i));
    }
    return s;
  };
  switch (m.kind()) {
    case MapKind::Euclidean: return 0.5 * x.squaredNorm();
    case MapKind::NegEntropy: return xlogx(x);
    case MapKind::ItakuraSaito: {
      double s = 0.0;
      for (Index i = 0; i < x.size(); ++i) {
        if (!(x(i) > 0.0)) return kInf;
        s -= std::log(x(i));
      }
      return s;
    }
    case MapKind::SimplexEntropy:
      if (std::abs(x.sum() - 1.0) > 1e-9) return kInf;
      return xlogx(x);
    case MapKind::Projection:
      if (m.projector()->membership_residual(x) > 1e-9) return kInf;
      return 0.5 * x.squaredNorm();
  }
  throw UnsupportedError("primal: unknown map");
}

// grad psi(x) at an interior point.
inline Vector grad_primal(const MirrorMap& m, const Vector& x) {
  detail::check_arg(m, x, "grad_primal");
  auto need_positive = [&](const char* name) {
    for (Index i = 0; i < x.size(); ++i)
      if (!(x(i) > 0.0))
        throw DomainError(std::string(name) + ": primal coordinate " + std::to_string(i) +
                          " must be positive");
  };
  switch (m.kind()) {
    case MapKind::Euclidean: return x;
    case MapKind::NegEntropy:
      need_positive("neg_entropy");
      return (1.0 + x.array().log()).matrix();
    case MapKind::ItakuraSaito:
      need_positive("itakura_saito");
      return (-x.array().inverse()).matrix();
    case MapKind::SimplexEntropy:
      need_positive("simplex_entropy");
      return (1.0 + x.array().log()).matrix();
    case MapKind::Projection:
      throw UnsupportedError("grad_primal: projection map is not differentiable on the boundary");
  }
  throw UnsupportedError("grad_primal: unknown map");
}

// Hessian of psi*.
inline Matrix hessian_conjugate(const MirrorMap& m, const Vector& u) {
  detail::check_arg(m, u, "hessian_conjugate");
  switch (m.kind()) {
    case MapKind::Euclidean: return Matrix::Identity(u.size(), u.size());
    case MapKind::NegEntropy: return grad_conjugate(m, u).asDiagonal();
    case MapKind::ItakuraSaito:
      detail::require_negative(u);
      return u.array().square().inverse().matrix().asDiagonal();
    case MapKind::SimplexEntropy: {
      const Vector p = detail::softmax(u);
      Matrix h = -p * p.transpose();
      h.diagonal() += p;
      return h;
    }
    case MapKind::Projection:
      throw UnsupportedError("hessian_conjugate: projection map has no Hessian");
  }
  throw UnsupportedError("hessian_conjugate: unknown map");
}

// D_{psi*}(u, u_ref)
inline double bregman_conjugate(const MirrorMap& m, const Vector& u, const Vector& u_ref) {
  require_size(u_ref.size(), u.size(), "bregman reference");
  return conjugate(m, u) - conjugate(m, u_ref) - grad_conjugate(m, u_ref).dot(u - u_ref);
}

// psi(x) + psi*(u) - u^T x. Equals D_{psi*}(u, u*) whenever grad psi*(u*) = x*, and stays
// finite for boundary x* where no such u* exists. +inf if psi(x) is.
inline double fenchel_young_gap(const MirrorMap& m, const Vector& u, const Vector& x) {
  require_size(x.size(), u.size(), "fenchel_young_gap point");
  const double p = primal(m, x);
  if (p == kInf) return kInf;
  return p + conjugate(m, u) - u.dot(x);
}

// A dual point u* with grad psi*(u*) = x*.
inline Vector dual_point_for(const MirrorMap& m, const Vector& x) {
  detail::check_arg(m, x, "dual_point_for");
  Vector u;
  switch (m.kind()) {
    case MapKind::Euclidean: u = x; break;
    case MapKind::NegEntropy:
    case MapKind::ItakuraSaito:
    case MapKind::SimplexEntropy:
      for (Index i = 0; i < x.size(); ++i)
        if (!(x(i) > 0.0))
          throw DomainError(std::string(to_string(m.kind())) + ": coordinate " + std::to_string(i) +
                            " of the primal point is on the boundary, no dual point exists");
      if (m.kind() == MapKind::NegEntropy) u = (1.0 + x.array().log()).matrix();
      else if (m.kind() == MapKind::ItakuraSaito) u = (-x.array().inverse()).matrix();
      else u = x.array().log().matrix();
      break;
    case MapKind::Projection:
      if (m.projector()->membership_residual(x) > 1e-9)
        throw DomainError("projection: primal point is outside the set");
      u = x;
      break;
  }
  if ((grad_conjugate(m, u) - x).lpNorm<Eigen::Infinity>() > 1e-8 * std::max(1.0, x.lpNorm<Eigen::Infinity>()))
    throw DomainError("dual_point_for: point is not in the range of grad psi*");
  return u;
}

// Per-agent maps acting on consecutive blocks of a stacked vector.
class MirrorBlocks {
 public:
  explicit MirrorBlocks(std::vector<MirrorMap> maps) : maps_(std::move(maps)) {
    if (maps_.empty()) throw SizeError("mirror blocks: no maps");
    Index off = 0;
    for (const auto& m : maps_) {
      offsets_.push_back(off);
      off += m.dim();
    }
    dim_ = off;
  }

  Index dim() const { return dim_; }
  std::size_t size() const { return maps_.size(); }
  const MirrorMap& map(std::size_t i) const { return maps_[i]; }
  Index offset(std::size_t i) const { return offsets_[i]; }

  Vector grad_conjugate(const Vector& u, bool* clamped = nullptr) const {
    require_size(u.size(), dim_, "stacked dual state");
    Vector out(dim_);
    for (std::size_t i = 0; i < maps_.size(); ++i)
      out.segment(offsets_[i], maps_[i].dim()) =
          mirrorflow::grad_conjugate(maps_[i], u.segment(offsets_[i], maps_[i].dim()), clamped);
    return out;
  }

  double fenchel_young_gap(const Vector& u, const Vector& x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < maps_.size(); ++i)
      s += mirrorflow::fenchel_young_gap(maps_[i], u.segment(offsets_[i], maps_[i].dim()),
                                         x.segment(offsets_[i], maps_[i].dim()));
    return s;
  }

  // Largest set membership violation over the blocks.
  double membership_residual(const Vector& x) const {
    double r = 0.0;
    for (std::size_t i = 0; i < maps_.size(); ++i)
      r = std::max(r, maps_[i].membership_residual(x.segment(offsets_[i], maps_[i].dim())));
    return r;
  }

 private:
  std::vector<MirrorMap> maps_;
  std::vector<Index> offsets_;
  Index dim_ = 0;
};

}  // namespace mirrorflow
