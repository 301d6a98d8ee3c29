#include <gtest/gtest.h>

#include "mirrorflow/integrator.hpp"

using namespace mirrorflow;

namespace {

// y1' = y2, y2' = -y1, exact (cos, -sin)(t - 1) from (1, 0) at t = 1
VectorField harmonic() {
  return VectorField("harmonic", StateLayout{1, 0, 0}, [](double, const Vector& y, Vector& dy, FieldFlags&) {
    dy(0) = y(1);
    dy(1) = -y(0);
  });
}

Vector harmonic_exact(double t) {
  Vector y(2);
  y << std::cos(t - 1.0), -std::sin(t - 1.0);
  return y;
}

// y' = y^2 from y(1) = 1 blows up at t = 2
VectorField blowup() {
  return VectorField("blowup", StateLayout{1, 0, 0}, [](double, const Vector& y, Vector& dy, FieldFlags&) {
    dy.setZero();
    dy(0) = y(0) * y(0);
  });
}

Vector start() {
  Vector y(2);
  y << 1.0, 0.0;
  return y;
}

double fixed_step_error(double h) {
  IntegratorConfig cfg;
  cfg.rel_tol = cfg.abs_tol = 1e10;  // accept every step
  cfg.initial_step = cfg.max_step = h;
  cfg.sample_times = {3.0};
  const auto tr = integrate(harmonic(), start(), 1.0, 3.0, cfg);
  EXPECT_TRUE(tr.ok());
  return (tr.states.back() - harmonic_exact(3.0)).norm();
}

}  // namespace

TEST(Integrator, FifthOrderUnderHalving) {
  std::vector<double> err;
  for (double h : {0.2, 0.1, 0.05, 0.025}) err.push_back(fixed_step_error(h));
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double order = std::log2(err[i - 1] / err[i]);
    EXPECT_GT(order, 4.6) << "halving " << i;
    EXPECT_LT(order, 5.6) << "halving " << i;
  }
}

TEST(Integrator, ToleranceControlsError) {
  double prev = kInf;
  for (double tol : {1e-4, 1e-7, 1e-10}) {
    IntegratorConfig cfg;
    cfg.rel_tol = tol;
    cfg.abs_tol = tol;
    const auto tr = integrate(harmonic(), start(), 1.0, 20.0, cfg);
    ASSERT_TRUE(tr.ok());
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k)
      worst = std::max(worst, (tr.states[k] - harmonic_exact(tr.times[k])).lpNorm<Eigen::Infinity>());
    EXPECT_LT(worst, 200.0 * tol);
    EXPECT_LT(worst, prev);
    prev = worst;
  }
}

TEST(Integrator, DenseOutputMatchesReintegration) {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-11;
  cfg.abs_tol = 1e-13;
  cfg.sample_times = {1.0, 2.345, 7.0};
  const auto dense = integrate(harmonic(), start(), 1.0, 7.0, cfg);
  cfg.sample_times = {2.345};
  const auto direct = integrate(harmonic(), start(), 1.0, 2.345, cfg);
  ASSERT_TRUE(dense.ok() && direct.ok());
  ASSERT_EQ(dense.size(), 3u);
  EXPECT_EQ(dense.states[0], start());
  EXPECT_LE((dense.states[1] - direct.states.back()).lpNorm<Eigen::Infinity>(), 1e-9);
  EXPECT_EQ(dense.times.back(), 7.0);
}

TEST(Integrator, GeometricSamplingByDefault) {
  IntegratorConfig cfg;
  cfg.points_per_decade = 20;
  const auto tr = integrate(harmonic(), start(), 1.0, 100.0, cfg);
  ASSERT_EQ(tr.size(), 41u);
  EXPECT_EQ(tr.times.front(), 1.0);
  EXPECT_EQ(tr.times.back(), 100.0);
}

TEST(Integrator, Deterministic) {
  IntegratorConfig cfg;
  const auto a = integrate(harmonic(), start(), 1.0, 50.0, cfg);
  const auto b = integrate(harmonic(), start(), 1.0, 50.0, cfg);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_EQ(a.evaluations, b.evaluations);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.states[k], b.states[k]);
}

TEST(Integrator, RecordsMuPerSample) {
  IntegratorConfig cfg;
  cfg.points_per_decade = 5;
  const auto tr = integrate(harmonic(), start(), 1.0, 10.0, cfg, [](double t) { return 1.0 / t; });
  ASSERT_EQ(tr.mu.size(), tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) EXPECT_EQ(tr.mu[k], 1.0 / tr.times[k]);
}

TEST(Integrator, MaxStepsReportsAndKeepsSamples) {
  IntegratorConfig cfg;
  cfg.max_steps = 10;
  cfg.rel_tol = cfg.abs_tol = 1e-12;
  const auto tr = integrate(harmonic(), start(), 1.0, 100.0, cfg);
  EXPECT_EQ(tr.status, IntegrationStatus::MaxStepsExceeded);
  EXPECT_FALSE(tr.ok());
  EXPECT_GE(tr.size(), 1u);
  EXPECT_NE(tr.message.find("maximum"), std::string::npos);
  EXPECT_THROW(tr.throw_if_failed(), Error);
}

TEST(Integrator, BlowupIsReported) {
  Vector y0(2);
  y0 << 1.0, 0.0;
  const auto tr = integrate(blowup(), y0, 1.0, 3.0, {});
  EXPECT_FALSE(tr.ok());
  EXPECT_TRUE(tr.status == IntegrationStatus::StepTooSmall || tr.status == IntegrationStatus::NonFinite ||
              tr.status == IntegrationStatus::MaxStepsExceeded)
      << to_string(tr.status);
  ASSERT_FALSE(tr.times.empty());
  EXPECT_LT(tr.times.back(), 2.0);
}

TEST(Integrator, FieldErrorsAreReported) {
  const VectorField bad("bad", StateLayout{1, 0, 0}, [](double t, const Vector&, Vector& dy, FieldFlags&) {
    if (t > 1.5) throw DomainError("left the domain");
    dy.setZero();
  });
  const auto tr = integrate(bad, start(), 1.0, 3.0, {});
  EXPECT_EQ(tr.status, IntegrationStatus::FieldError);
  EXPECT_NE(tr.message.find("left the domain"), std::string::npos);

  const VectorField nan("nan", StateLayout{1, 0, 0}, [](double, const Vector&, Vector& dy, FieldFlags&) {
    dy.setConstant(std::nan(""));
  });
  const auto tn = integrate(nan, start(), 1.0, 3.0, {});
  EXPECT_EQ(tn.status, IntegrationStatus::NonFinite);
  EXPECT_THROW(tn.throw_if_failed(), NumericError);
}

TEST(Integrator, BadArguments) {
  EXPECT_THROW(integrate(harmonic(), start(), 0.0, 1.0, {}), ParameterError);
  EXPECT_THROW(integrate(harmonic(), start(), 2.0, 1.0, {}), ParameterError);
  EXPECT_THROW(integrate(harmonic(), Vector::Zero(3), 1.0, 2.0, {}), SizeError);
  IntegratorConfig cfg;
  cfg.rel_tol = 0.0;
  EXPECT_THROW(integrate(harmonic(), start(), 1.0, 2.0, cfg), ParameterError);
  cfg = {};
  cfg.sample_times = {1.5, 1.2};
  EXPECT_THROW(integrate(harmonic(), start(), 1.0, 2.0, cfg), ParameterError);
}
