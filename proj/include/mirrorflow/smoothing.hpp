#pragma once

#include <cmath>
#include <string>

#include "mirrorflow/numerics.hpp"

namespace mirrorflow {

struct SmoothScalar {
  double value;
  double grad;  // d/ds
};

namespace detail {
inline void check_mu(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu))
    throw ParameterError("smoothing parameter must be positive and finite, got " + std::to_string(mu));
}
}  // namespace detail

// Surrogate of max(s, 0): exact outside |s| <= mu, (s + mu)^2 / (4 mu) inside.
inline SmoothScalar smooth_max_zero(double s, double mu) {
  detail::check_mu(mu);
  if (s > mu) return {s, 1.0};
  if (s < -mu) return {0.0, 0.0};
  return {(s + mu) * (s + mu) / (4.0 * mu), (s + mu) / (2.0 * mu)};
}

// Surrogate of |s|: exact outside |s| <= mu/2, s^2/mu + mu/4 inside.
inline SmoothScalar smooth_abs(double s, double mu) {
  detail::check_mu(mu);
  if (std::abs(s) > 0.5 * mu) return {std::abs(s), s > 0.0 ? 1.0 : -1.0};
  return {s * s / mu + 0.25 * mu, 2.0 * s / mu};
}

// max(a, b) = b + max(a - b, 0) and friends, smoothed through smooth_max_zero.
inline double smooth_max(double a, double b, double mu) { return b + smooth_max_zero(a - b, mu).value; }
inline double smooth_min(double a, double b, double mu) { return a - smooth_max_zero(a - b, mu).value; }
inline double smooth_mid(double s, double lo, double hi, double mu) {
  return smooth_min(smooth_max(s, lo, mu), hi, mu);
}

struct SmoothVector {
  double value;
  Vector grad;
};

// Coordinatewise smooth_abs summed. kappa = n / 4.
inline SmoothVector smooth_l1(const Vector& x, double mu) {
  detail::check_mu(mu);
  SmoothVector out{0.0, Vector(x.size())};
  for (Index i = 0; i < x.size(); ++i) {
    const auto r = smooth_abs(x(i), mu);
    out.value += r.value;
    out.grad(i) = r.grad;
  }
  return out;
}

inline double smooth_l1_kappa(Index n) { return 0.25 * static_cast<double>(n); }

// mu(t) = mu0 t^{-2 alpha} for t >= t0, evaluated from t rather than carried as state.
class MuSchedule {
 public:
  MuSchedule(double mu0, double alpha, double t0 = 1.0) : mu0_(mu0), alpha_(alpha), t0_(t0) {
    if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw ParameterError("mu0 must be positive");
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (!(t0 > 0.0)) throw ParameterError("t0 must be positive");
  }

  double operator()(double t) const {
    // small relative slack so a step landing a rounding error before t0 is accepted
    if (!(t >= t0_ * (1.0 - 1e-12)))
      throw ParameterError("mu schedule evaluated at t = " + std::to_string(t) + " < t0");
    return mu0_ * std::pow(t, -2.0 * alpha_);
  }

  double mu0() const { return mu0_; }
  double alpha() const { return alpha_; }
  double t0() const { return t0_; }

 private:
  double mu0_, alpha_, t0_;
};

inline double mu_at(const MuSchedule& s, double t) { return s(t); }

}  // namespace mirrorflow
