#include <gtest/gtest.h>

#include "mirrorflow/diagnostics.hpp"

using namespace mirrorflow;

namespace {

SystemParams params(double alpha, double beta) {
  SystemParams p;
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

std::vector<double> grid(double t0, double t1, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = t0 * std::pow(t1 / t0, double(i) / (n - 1));
  return t;
}

// A report with the given bound_gap column and benign everything else.
RunReport synthetic(const std::vector<double>& t, const std::function<double(double)>& g) {
  RunReport r;
  r.times = t;
  for (double s : t) {
    r.bound_gap.push_back(g(s));
    r.lagrangian_gap.push_back(g(s));
    r.signed_primal.push_back(g(s));
    r.primal_gap.push_back(std::abs(g(s)));
    r.feasibility.push_back(0.0);
    r.residual_norm.push_back(0.0);
    r.lyapunov.push_back(1.0);
    r.membership.push_back(0.0);
  }
  r.v0 = 1.0;
  return r;
}

}  // namespace

TEST(RateFit, RecoversPowerLaw) {
  const auto t = grid(1.0, 1000.0, 61);
  std::vector<double> v;
  for (double s : t) v.push_back(3.0 * std::pow(s, -2.0));
  const auto f = rate_fit(t, v);
  EXPECT_NEAR(f.slope, -2.0, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
  EXPECT_EQ(f.clipped, 0u);
}

TEST(RateFit, SkipsTheFirstFifthOfLogTime) {
  const auto t = grid(1.0, 1e5, 51);  // 10 samples per decade
  std::vector<double> v;
  for (double s : t) v.push_back(s < 5.0 ? 1e6 : 1.0 / s);  // transient inside the first decade only
  const auto f = rate_fit(t, v);
  EXPECT_NEAR(f.slope, -1.0, 1e-12);
  EXPECT_GE(f.used, 40u);
  EXPECT_LE(f.used, 41u);
}

TEST(RateFit, ClipsNonpositiveValues) {
  const auto t = grid(1.0, 100.0, 20);
  std::vector<double> v(t.size(), 1.0);
  v.back() = 0.0;
  v[v.size() - 2] = -1.0;
  const auto f = rate_fit(t, v);
  EXPECT_EQ(f.clipped, 2u);
  EXPECT_LT(f.slope, 0.0);
}

TEST(RateFit, Errors) {
  EXPECT_THROW(rate_fit({1, 2, 3}, {1, 2, 3}), ParameterError);
  EXPECT_THROW(rate_fit(grid(1, 10, 12), std::vector<double>(11, 1.0)), SizeError);
  auto t = grid(1, 10, 12);
  t[0] = 0.0;
  EXPECT_THROW(rate_fit(t, std::vector<double>(12, 1.0)), DomainError);
}

TEST(Gaps, ZeroAtTheSaddle) {
  const auto p = build_scalar();
  const auto ref = reference_solution(p);
  const PrimalDualState s{ref.x, ref.x, ref.lambda, ref.lambda, std::nullopt, std::nullopt};
  // the reference is accurate to its KKT residual, and the gap is linear in that error
  ASSERT_LE(ref.kkt_residual, 1e-8);
  EXPECT_NEAR(lagrangian_gap(p, ref.x, ref.lambda, ref, 1.0), 0.0, 10 * ref.kkt_residual);
  EXPECT_NEAR(lyapunov_apdmd(5.0, s, p, ref, params(2.0, 1.0)), 0.0, 100 * ref.kkt_residual);
}

TEST(Gaps, ScalarGapByHand) {
  const auto p = build_scalar();
  ReferenceSolution ref;
  ref.x = Vector::Ones(1);
  ref.lambda = -Vector::Ones(1);
  ref.f = 0.5;
  const double x = 1.7, be = 3.0;
  const double want = 0.5 * x * x - 0.5 - (x - 1.0) + 0.5 * be * (x - 1.0) * (x - 1.0);
  EXPECT_NEAR(lagrangian_gap(p, Vector::Constant(1, x), Vector::Zero(1), ref, be), want, 1e-15);
  // the Lagrangian gap is nonnegative for every x: it equals (1 + beta)(x - 1)^2 / 2 here
  EXPECT_NEAR(want, 0.5 * (1 + be) * (x - 1) * (x - 1), 1e-15);
}

TEST(Lyapunov, EuclideanMirrorTermIsHalfSquaredDistance) {
  const auto qp = build_scalar();
  ReferenceSolution ref;
  ref.x = Vector::Constant(1, 1.0);
  ref.lambda = Vector::Constant(1, -1.0);
  ref.f = 0.5;
  const PrimalDualState s{Vector::Constant(1, 1.0), Vector::Constant(1, 3.5), ref.lambda, Vector::Constant(1, 0.0),
                          std::nullopt, std::nullopt};
  const auto terms = lyapunov_terms(SystemKind::APDMD, 2.0, s, qp, ref, params(2.0, 1.0));
  ASSERT_EQ(terms.mirror.size(), 1u);
  EXPECT_NEAR(terms.mirror[0], 0.5 * 2.5 * 2.5, 1e-14);
  EXPECT_NEAR(terms.multiplier, 0.5, 1e-15);
  EXPECT_NEAR(terms.scaled_gap, 0.0, 1e-15);
}

TEST(Lyapunov, LogisticGapMidTrajectoryAgreesWithFormula) {
  const auto p = build_logistic_centralized();
  const auto ref = reference_solution(p);
  const auto prm = params(2.0, 1.0);
  const auto f = apdmd_field(p, prm);
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-9;
  cfg.abs_tol = 1e-12;
  cfg.points_per_decade = 10;
  const auto tr = integrate(f, pack(f.layout(), initial_state(p)), 1.0, 10.0, cfg);
  ASSERT_TRUE(tr.ok());
  const auto rep = evaluate_run(SystemKind::APDMD, tr, p, ref, prm);
  const std::size_t k = tr.size() / 2;
  const Vector x = tr.states[k].head(4);
  const Vector r = p.a * x - p.b;
  const double want = std::log(1.0 + std::exp(-x.sum())) - std::log(1.0 + std::exp(-1.0)) + ref.lambda.dot(r) +
                      0.5 * r.squaredNorm();
  EXPECT_NEAR(rep.lagrangian_gap[k], want, 1e-12);
  EXPECT_NEAR(rep.feasibility[k], r.norm(), 1e-15);
}

TEST(Bounds, ScalarRunPassesAndNegativeControlFails) {
  const auto p = build_scalar();
  const auto ref = reference_solution(p);
  const auto prm = params(2.0, 1.0);
  const auto f = apdmd_field(p, prm);
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  const auto tr = integrate(f, pack(f.layout(), initial_state(p)), 1.0, 100.0, cfg);
  const auto rep = evaluate_run(SystemKind::APDMD, tr, p, ref, prm);
  EXPECT_FALSE(rep.anchored_mirror_term);
  // x = u = lambda = v = 0 at t = 1: gap 1 scaled by 1/4, mirror 1/2, multiplier 1/2
  EXPECT_NEAR(rep.v0, 1.25, 1e-9);
  const auto ok = check_bounds(rep, prm, rep.v0);
  EXPECT_TRUE(ok.passed());
  EXPECT_TRUE(ok.lyapunov_ok);
  EXPECT_GT(ok.gap_ratio_max, 0.0);
  // shrink the allowed constant below what was observed: the check has to notice
  const auto bad = check_bounds(rep, prm, rep.v0, 0.5 * ok.gap_ratio_max);
  EXPECT_FALSE(bad.gap_ok);
  EXPECT_FALSE(bad.passed());
  const auto worse = check_bounds(rep, prm, 1e-6 * rep.v0);
  EXPECT_FALSE(worse.gap_ok);
  EXPECT_FALSE(worse.feasibility_ok);
}

TEST(Bounds, MonotropicFeasibilityUsesUnitBeta) {
  const auto t = grid(1.0, 10.0, 11);
  auto r = synthetic(t, [](double s) { return 1.0 / (s * s); });
  r.system = SystemKind::ADMD;
  r.feasibility_kind = FeasibilityKind::MultiplierConsensusForm;
  for (std::size_t k = 0; k < t.size(); ++k) r.feasibility[k] = 1.5 * 2.0 * 4.0 / (t[k] * t[k]);
  // bound with beta = 1 is 2 alpha^2 V0 / t^2 = 8 / t^2; observed is 1.5 times that
  EXPECT_FALSE(check_bounds(r, params(2.0, 100.0), 1.0).feasibility_ok);
  EXPECT_NEAR(check_bounds(r, params(2.0, 100.0), 1.0).feasibility_ratio_max, 1.5, 1e-12);
  r.system = SystemKind::ADPDMD;
  EXPECT_NEAR(check_bounds(r, params(2.0, 100.0), 1.0).feasibility_ratio_max, 150.0, 1e-9);
}

TEST(Bounds, SaddleAndLyapunovFlags) {
  const auto t = grid(1.0, 10.0, 11);
  auto r = synthetic(t, [](double s) { return 1.0 / (s * s); });
  EXPECT_TRUE(check_bounds(r, params(2.0, 1.0), 1.0).saddle_ok);
  r.bound_gap[5] = -1e-6;
  EXPECT_FALSE(check_bounds(r, params(2.0, 1.0), 1.0).saddle_ok);
  r.bound_gap[5] = 0.0;
  r.lyapunov[7] = 1.001;
  const auto bc = check_bounds(r, params(2.0, 1.0), 1.0);
  EXPECT_FALSE(bc.lyapunov_ok);
  EXPECT_NEAR(bc.lyapunov_max_increase, 1e-3 - 1e-6 - 1e-10, 1e-12);
}

TEST(Bounds, IntegralPlateau) {
  const auto t = grid(1.0, 1e4, 81);
  // t * 1/t^3 is integrable: the last decade adds almost nothing
  EXPECT_TRUE(check_bounds(synthetic(t, [](double s) { return 1.0 / (s * s * s); }), params(2, 1), 1.0)
                  .integral_plateau);
  // t * 1/t^2 = 1/t integrates to log t: each decade adds a quarter of the total
  const auto grow = check_bounds(synthetic(t, [](double s) { return 1.0 / (s * s); }), params(2, 1), 1.0);
  EXPECT_FALSE(grow.integral_plateau);
  EXPECT_NEAR(grow.integral_growth_last_decade, 0.25, 0.01);
}

TEST(Lyapunov, InfiniteMirrorBlockIsAnchored) {
  RunReport rep;
  std::vector<LyapunovTerms> terms(3);
  const double raws[] = {5.0, 2.0, 3.0};
  for (int i = 0; i < 3; ++i) {
    terms[i].scaled_gap = 1.0;
    terms[i].mirror = {0.5, kInf};
    terms[i].mirror_raw = {-1.0, raws[i]};
  }
  detail::assemble_lyapunov(rep, terms);
  EXPECT_TRUE(rep.anchored_mirror_term);
  ASSERT_EQ(rep.lyapunov.size(), 3u);
  EXPECT_EQ(rep.lyapunov[0], 1.0 + 0.5 + 3.0);
  EXPECT_EQ(rep.lyapunov[1], 1.5);
  EXPECT_EQ(rep.v0, 4.5);
  EXPECT_FALSE(rep.warnings.empty());
}
