#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <variant>

#include "mirrorflow/numerics.hpp"

namespace mirrorflow {

struct BoxSet {
  Vector lo, hi;
};
struct SphereSet {  // closed ball
  Vector center;
  double radius;
};
struct AffineSet {  // {x : A x = b}
  Matrix a;
  Vector b;
  Matrix a_pinv;
};
struct HalfSpaceSet {  // {x : a^T x <= b}
  Vector a;
  double b;
};
struct SimplexSet {
  Index n;
};
struct OrthantSet {
  Index n;
};

// Euclidean projection onto a closed convex set with a closed form.
class Projector {
 public:
  using Set = std::variant<BoxSet, SphereSet, AffineSet, HalfSpaceSet, SimplexSet, OrthantSet>;

  static Projector box(Vector lo, Vector hi) {
    require_size(hi.size(), lo.size(), "box upper bound");
    for (Index i = 0; i < lo.size(); ++i)
      if (!(lo(i) <= hi(i)))
        throw DomainError("box: lo > hi at coordinate " + std::to_string(i));
    return Projector(BoxSet{std::move(lo), std::move(hi)});
  }
  static Projector sphere(Vector center, double radius) {
    if (!(radius > 0.0)) throw DomainError("sphere: radius must be positive");
    return Projector(SphereSet{std::move(center), radius});
  }
  static Projector affine(Matrix a, Vector b) {
    require_size(b.size(), a.rows(), "affine right-hand side");
    Matrix pinv = pseudoinverse(a);
    Vector xp = pinv * b;
    if ((a * xp - b).norm() > 1e-9 * std::max(1.0, b.norm()))
      throw DomainError("affine: A x = b is inconsistent");
    return Projector(AffineSet{std::move(a), std::move(b), std::move(pinv)});
  }
  static Projector half_space(Vector a, double b) {
    if (a.norm() == 0.0) throw DomainError("half_space: zero normal");
    return Projector(HalfSpaceSet{std::move(a), b});
  }
  static Projector simplex(Index n) {
    if (n < 1) throw SizeError("simplex: n < 1");
    return Projector(SimplexSet{n});
  }
  static Projector orthant(Index n) {
    if (n < 1) throw SizeError("orthant: n < 1");
    return Projector(OrthantSet{n});
  }

  Index dim() const {
    return std::visit(
        [](const auto& s) -> Index {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, BoxSet>) return s.lo.size();
          else if constexpr (std::is_same_v<T, SphereSet>) return s.center.size();
          else if constexpr (std::is_same_v<T, AffineSet>) return s.a.cols();
          else if constexpr (std::is_same_v<T, HalfSpaceSet>) return s.a.size();
          else return s.n;
        },
        set_);
  }

  const Set& set() const { return set_; }

  std::string describe() const {
    static const char* names[] = {"box", "sphere", "affine", "half_space", "simplex", "orthant"};
    return names[set_.index()];
  }

  Vector project(const Vector& x) const {
    require_size(x.size(), dim(), "projection argument");
    if (!x.allFinite()) throw NumericError("projection: non-finite argument");
    return std::visit([&](const auto& s) { return project_onto(s, x); }, set_);
  }

  // Zero exactly on the set, grows with the constraint violation otherwise.
  double membership_residual(const Vector& x) const {
    require_size(x.size(), dim(), "membership argument");
    return std::visit([&](const auto& s) { return residual(s, x); }, set_);
  }

 private:
  explicit Projector(Set s) : set_(std::move(s)) {}

  static Vector project_onto(const BoxSet& s, const Vector& x) {
    return x.cwiseMax(s.lo).cwiseMin(s.hi);
  }
  static Vector project_onto(const SphereSet& s, const Vector& x) {
    const Vector d = x - s.center;
    const double n = d.norm();
    if (n <= s.radius) return x;
    return s.center + (s.radius / n) * d;
  }
  static Vector project_onto(const AffineSet& s, const Vector& x) {
    return x - s.a_pinv * (s.a * x - s.b);
  }
  static Vector project_onto(const HalfSpaceSet& s, const Vector& x) {
    const double viol = s.a.dot(x) - s.b;
    // a violation at rounding level of a^T x means x is already a projection
    const double eps = 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(s.b) + s.a.cwiseAbs().dot(x.cwiseAbs()));
    if (viol <= eps) return x;
    return x - (viol / s.a.squaredNorm()) * s.a;
  }
  static Vector project_onto(const SimplexSet&, const Vector& x) { return project_simplex(x); }
  static Vector project_onto(const OrthantSet&, const Vector& x) { return x.cwiseMax(0.0); }

  static double residual(const BoxSet& s, const Vector& x) {
    return std::max(0.0, std::max((s.lo - x).maxCoeff(), (x - s.hi).maxCoeff()));
  }
  static double residual(const SphereSet& s, const Vector& x) {
    return std::max(0.0, (x - s.center).norm() - s.radius);
  }
  static double residual(const AffineSet& s, const Vector& x) {
    return (s.a * x - s.b).lpNorm<Eigen::Infinity>();
  }
  static double residual(const HalfSpaceSet& s, const Vector& x) {
    return std::max(0.0, s.a.dot(x) - s.b);
  }
  static double residual(const SimplexSet&, const Vector& x) {
    return std::max(std::max(0.0, -x.minCoeff()), std::abs(x.sum() - 1.0));
  }
  static double residual(const OrthantSet&, const Vector& x) {
    return std::max(0.0, -x.minCoeff());
  }

 public:
  // Sort and threshold.
  static Vector project_simplex(const Vector& x) {
    const Index n = x.size();
    std::vector<double> s(x.data(), x.data() + n);
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0, tau = 0.0;
    for (Index k = 0; k < n; ++k) {
      cum += s[static_cast<std::size_t>(k)];
      const double cand = (cum - 1.0) / static_cast<double>(k + 1);
      if (s[static_cast<std::size_t>(k)] - cand > 0.0) tau = cand;
    }
    return (x.array() - tau).cwiseMax(0.0).matrix();
  }

 private:
  Set set_;
};

}  // namespace mirrorflow
