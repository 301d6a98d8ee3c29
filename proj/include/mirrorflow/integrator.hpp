#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mirrorflow/dynamics.hpp"
#include "mirrorflow/numerics.hpp"

namespace mirrorflow {

struct IntegratorConfig {
  double rel_tol = 1e-6;
  double abs_tol = 1e-8;
  double initial_step = 0.0;  // 0 picks one from the field
  double min_step = 1e-14;
  double max_step = kInf;
  long max_steps = 5'000'000;
  int points_per_decade = 40;
  std::vector<double> sample_times;  // overrides the geometric grid when non-empty

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ParameterError("integrator tolerances must be positive");
    if (!(min_step > 0.0) || !(min_step <= max_step)) throw ParameterError("need 0 < min_step <= max_step");
    if (max_steps < 1) throw ParameterError("max_steps must be positive");
  }
};

enum class IntegrationStatus { Completed, MaxStepsExceeded, StepTooSmall, NonFinite, FieldError };

inline const char* to_string(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::Completed: return "completed";
    case IntegrationStatus::MaxStepsExceeded: return "max_steps_exceeded";
    case IntegrationStatus::StepTooSmall: return "step_too_small";
    case IntegrationStatus::NonFinite: return "non_finite";
    case IntegrationStatus::FieldError: return "field_error";
  }
  return "?";
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> mu;  // per sample, empty for unsmoothed systems
  long accepted = 0, rejected = 0, evaluations = 0;
  bool exponent_clamped = false;
  IntegrationStatus status = IntegrationStatus::Completed;
  std::string message;

  bool ok() const { return status == IntegrationStatus::Completed; }
  std::size_t size() const { return times.size(); }

  void throw_if_failed() const {
    if (ok()) return;
    if (status == IntegrationStatus::NonFinite) throw NumericError(message);
    throw Error(message);
  }
};

namespace dopri {
// Dormand-Prince 5(4) tableau with the free interpolant of Hairer's DOPRI5.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace dopri

namespace detail {
inline double scaled_max(const Vector& e, const Vector& y0, const Vector& y1, double atol, double rtol) {
  double m = 0.0;
  for (Index i = 0; i < e.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    m = std::max(m, std::abs(e(i)) / sc);
  }
  return m;
}
}  // namespace detail

// Adaptive Dormand-Prince 5(4) with PI step control. Samples come from the dense output;
// failures return the samples collected so far with status and message set.
inline Trajectory integrate(const VectorField& field, const Vector& y0, double t0, double tf,
                            const IntegratorConfig& cfg = {}, std::function<double(double)> mu = nullptr) {
  using namespace dopri;
  cfg.validate();
  if (!(t0 > 0.0) || !(tf > t0)) throw ParameterError("integrate: need tf > t0 > 0");
  require_size(y0.size(), field.dim(), "initial state");
  if (!y0.allFinite()) throw NumericError("integrate: non-finite initial state");

  std::vector<double> grid = cfg.sample_times.empty() ? geometric_grid(t0, tf, cfg.points_per_decade)
                                                      : cfg.sample_times;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < t0 || grid[i] > tf) throw ParameterError("integrate: sample time outside [t0, tf]");
    if (i && !(grid[i] > grid[i - 1])) throw ParameterError("integrate: sample times must increase");
  }

  Trajectory tr;
  FieldFlags flags;
  auto record = [&](double t, const Vector& y) {
    tr.times.push_back(t);
    tr.states.push_back(y);
    if (mu) tr.mu.push_back(mu(t));
  };
  std::size_t next = 0;
  if (grid[0] == t0) {
    record(t0, y0);
    next = 1;
  }

  const Index n = y0.size();
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ys(n), y1(n), err(n);
  Vector y = y0;
  double t = t0;

  auto fail = [&](IntegrationStatus s, const std::string& msg) {
    tr.status = s;
    tr.message = msg;
    tr.exponent_clamped = flags.exponent_clamped;
    return tr;
  };
  auto f = [&](double tt, const Vector& yy, Vector& out) {
    field.eval(tt, yy, out, flags);
    ++tr.evaluations;
    if (!out.allFinite()) throw NumericError("non-finite field value at t = " + std::to_string(tt));
  };

  try {
    f(t, y, k1);
  } catch (const NumericError& e) {
    return fail(IntegrationStatus::NonFinite, e.what());
  } catch (const Error& e) {
    return fail(IntegrationStatus::FieldError, std::string(e.what()) + " at t = " + std::to_string(t));
  }

  double h = cfg.initial_step;
  if (h <= 0.0) {
    // Hairer's starting step heuristic, max norm
    Vector sc = (cfg.abs_tol + cfg.rel_tol * y.array().abs()).matrix();
    const double dn0 = (y.array() / sc.array()).abs().maxCoeff();
    const double dn1 = (k1.array() / sc.array()).abs().maxCoeff();
    double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
    h0 = std::min(h0, tf - t0);
    Vector k(n);
    try {
      f(t + h0, y + h0 * k1, k);
    } catch (const Error&) {
      k = k1;
    }
    const double dn2 = ((k - k1).array() / sc.array()).abs().maxCoeff() / h0;
    const double dm = std::max(dn1, dn2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min({h, cfg.max_step, tf - t0});

  constexpr double safe = 0.9, facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0, beta = 0.04;
  const double expo1 = 0.2 - beta * 0.75;
  double facold = 1e-4;
  bool last_rejected = false;

  while (t < tf) {
    if (tr.accepted + tr.rejected >= cfg.max_steps)
      return fail(IntegrationStatus::MaxStepsExceeded,
                  "maximum number of steps exceeded at t = " + std::to_string(t));
    if (h < cfg.min_step * std::max(1.0, std::abs(t)))
      return fail(IntegrationStatus::StepTooSmall, "step size underflow at t = " + std::to_string(t));
    bool hit_end = false;
    if (t + h >= tf || t + 1.01 * h >= tf) {
      h = tf - t;
      hit_end = true;
    }
    try {
      ys = y + h * a21 * k1;
      f(t + c2 * h, ys, k2);
      ys = y + h * (a31 * k1 + a32 * k2);
      f(t + c3 * h, ys, k3);
      ys = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      f(t + c4 * h, ys, k4);
      ys = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      f(t + c5 * h, ys, k5);
      ys = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      const double tph = hit_end ? tf : t + h;
      f(tph, ys, k6);
      y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      f(tph, y1, k7);
    } catch (const NumericError& e) {
      // a blown up trial step is treated as a rejection
      if (h > cfg.min_step * 16.0 * std::max(1.0, t)) {
        h *= 0.25;
        ++tr.rejected;
        last_rejected = true;
        continue;
      }
      return fail(IntegrationStatus::NonFinite, e.what());
    } catch (const Error& e) {
      if (h > cfg.min_step * 16.0 * std::max(1.0, t)) {
        h *= 0.25;
        ++tr.rejected;
        last_rejected = true;
        continue;
      }
      return fail(IntegrationStatus::FieldError, std::string(e.what()) + " near t = " + std::to_string(t));
    }
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = detail::scaled_max(err, y, y1, cfg.abs_tol, cfg.rel_tol);
    if (!std::isfinite(en)) {
      h *= 0.25;
      ++tr.rejected;
      last_rejected = true;
      continue;
    }
    const double fac11 = std::pow(std::max(en, 1e-300), expo1);
    if (en <= 1.0) {
      const double t_new = hit_end ? tf : t + h;
      // dense output on (t, t_new]
      if (next < grid.size() && grid[next] <= t_new) {
        const Vector ydiff = y1 - y;
        const Vector bspl = h * k1 - ydiff;
        const Vector r4 = ydiff - h * k7 - bspl;
        const Vector r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        while (next < grid.size() && grid[next] <= t_new) {
          const double ts = grid[next];
          if (ts == t_new) {
            record(ts, y1);
          } else {
            const double th = (ts - t) / h, th1 = 1.0 - th;
            record(ts, y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5))));
          }
          ++next;
        }
      }
      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(facc2, std::min(facc1, fac / safe));
      facold = std::max(en, 1e-4);
      ++tr.accepted;
      k1 = k7;
      y = y1;
      t = t_new;
      double hn = h / fac;
      if (last_rejected) hn = std::min(hn, h);
      last_rejected = false;
      h = std::min(hn, cfg.max_step);
    } else {
      h = h / std::min(facc1, fac11 / safe);
      ++tr.rejected;
      last_rejected = true;
    }
  }
  tr.exponent_clamped = flags.exponent_clamped;
  return tr;
}

}  // namespace mirrorflow
