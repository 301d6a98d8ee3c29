#include <gtest/gtest.h>

#include "mirrorflow/integrator.hpp"

using namespace mirrorflow;

namespace {

SystemParams params(double alpha, double beta, std::optional<double> mu0 = std::nullopt) {
  SystemParams p;
  p.alpha = alpha;
  p.beta = beta;
  if (mu0) p.mu = MuSchedule(*mu0, alpha, 1.0);
  return p;
}

// min x^T Q x + c^T x s.t. A x = b with Euclidean map, KKT solved directly.
struct EqualityQp {
  ConstrainedProblem problem;
  Vector x, lambda;
};

EqualityQp equality_qp(std::uint64_t seed, Index n, Index m) {
  SeededRng rng(seed);
  Matrix q = random_psd(rng, n) + Matrix::Identity(n, n);
  Vector c = random_gaussian_vector(rng, n);
  Matrix a = random_gaussian_matrix(rng, m, n);
  Vector b = random_gaussian_vector(rng, m);
  Matrix k = Matrix::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = 2.0 * q;
  k.topRightCorner(n, m) = a.transpose();
  k.bottomLeftCorner(m, n) = a;
  Vector rhs(n + m);
  rhs << -c, b;
  const Vector sol = Eigen::MatrixXd(k).fullPivLu().solve(rhs);
  ConstrainedProblem p{"qp", Objective::quadratic(q, c), a, b, MirrorMap::euclidean(n), Vector::Zero(n), std::nullopt};
  return {p, sol.head(n), sol.tail(m)};
}

Vector random_state(SeededRng& rng, Index size) { return random_gaussian_vector(rng, size); }

}  // namespace

TEST(Fields, ApdmdMatchesHandFormula) {
  const auto qp = equality_qp(1, 5, 2);
  const auto& p = qp.problem;
  const double al = 3.0, be = 0.7;
  const auto f = apdmd_field(p, params(al, be));
  SeededRng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Vector y = random_state(rng, f.dim());
    const double t = 1.0 + 10.0 * rng.uniform();
    const Vector x = y.head(5), u = y.segment(5, 5), lam = y.segment(10, 2), v = y.tail(2);
    const Vector g = p.objective.gradient(x);
    Vector want(14);
    want << (al / t) * (u - x), -(t / al) * (g + be * p.a.transpose() * (p.a * x - p.b) + p.a.transpose() * v),
        (al / t) * (v - lam), (t / al) * (p.a * u - p.b);
    ASSERT_LE((f(t, y) - want).lpNorm<Eigen::Infinity>(), 1e-12 * std::max(1.0, want.norm()));
  }
}

TEST(Fields, SapdmdUsesSmoothedGradientAtMuOfT) {
  auto p = build_nbp(7);
  const double al = 2.0, mu0 = 0.5;
  const auto f = sapdmd_field(p, params(al, 1.0, mu0));
  SeededRng rng(3);
  Vector y = Vector::Zero(f.dim());
  y.head(40) = random_gaussian_vector(rng, 40) * 0.1;
  const double t = 2.0, mu = mu0 * std::pow(t, -2.0 * al);
  Vector g(40);
  for (Index i = 0; i < 40; ++i) {
    const double s = y(i);
    g(i) = std::abs(s) > 0.5 * mu ? (s > 0 ? 1.0 : -1.0) : 2.0 * s / mu;
  }
  const Vector x = y.head(40);
  const Vector want_u = -(t / al) * (g + p.a.transpose() * (p.a * x - p.b));
  EXPECT_LE((f(t, y).segment(40, 40) - want_u).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Fields, AdpdmdMatchesKronForm) {
  const auto p = build_dis_logistic();
  const double al = 3.0, be = 2.0;
  const auto f = adpdmd_field(p, params(al, be));
  const Matrix l = kron(laplacian(p.graph), Matrix::Identity(4, 4));
  auto st = initial_state(p);
  SeededRng rng(4);
  st.lambda = random_gaussian_vector(rng, 16);
  st.v = random_gaussian_vector(rng, 16);
  st.x = st.x + 0.1 * random_gaussian_vector(rng, 16);
  const Vector y = pack(f.layout(), st);
  const double t = 3.0;
  const Vector pp = MirrorBlocks(p.mirrors).grad_conjugate(st.u);
  const Vector g = stacked_objective(p).gradient(st.x);
  Vector want(64);
  want << (al / t) * (pp - st.x), -(t / al) * (g + be * l * st.x + l * st.v), (al / t) * (st.v - st.lambda),
      (t / al) * l * pp;
  EXPECT_LE((f(t, y) - want).lpNorm<Eigen::Infinity>(), 1e-12 * want.norm());
}

TEST(Fields, AdmdMatchesLiftedForm) {
  const auto p = build_dist_qp();
  const double al = 4.0;
  const auto f = admd_field(p, params(al, 123.0));  // beta is ignored
  const Matrix l = kron(laplacian(p.graph), Matrix::Identity(5, 5));
  SeededRng rng(5);
  const Vector y = random_state(rng, f.dim());
  const auto s = unpack(f.layout(), y);
  const double t = 1.7;
  const Vector pp = MirrorBlocks(p.mirrors).grad_conjugate(s.u);
  const Vector g = stacked_objective(p).gradient(s.x);
  const Matrix ab = p.a_bar();
  Vector want(f.dim());
  want << (al / t) * (pp - s.x), -(t / al) * (g + ab.transpose() * s.v), (al / t) * (s.v - s.lambda),
      (t / al) * (ab * pp - p.d() - l * s.lambda + l * *s.z), (al / t) * (*s.z - *s.y), -(t / al) * l * s.v;
  EXPECT_LE((f(t, y) - want).lpNorm<Eigen::Infinity>(), 1e-12 * want.norm());
  EXPECT_EQ(f(t, y), admd_field(p, params(al, 1.0))(t, y));
}

TEST(Fields, StationaryAtTheSaddlePoint) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto qp = equality_qp(seed, 6, 3);
    const auto f = apdmd_field(qp.problem, params(2.5, 1.3));
    const PrimalDualState s{qp.x, qp.x, qp.lambda, qp.lambda, std::nullopt, std::nullopt};
    for (double t : {1.0, 10.0, 1000.0})
      EXPECT_LE(f(t, pack(f.layout(), s)).lpNorm<Eigen::Infinity>(), 1e-10 * t) << "seed " << seed;
  }
  const auto sc = apdmd_field(build_scalar(), params(2.0, 1.0));
  Vector y(4);
  y << 1.0, 1.0, -1.0, -1.0;
  EXPECT_EQ(sc(5.0, y), Vector::Zero(4));
}

TEST(Fields, BetaZeroDropsOnlyTheAugmentedTerm) {
  const auto qp = equality_qp(7, 4, 2);
  const auto& p = qp.problem;
  const double al = 3.0, be = 2.0, t = 2.0;
  SeededRng rng(8);
  const Vector y = random_state(rng, 12);
  const Vector d = apdmd_field(p, params(al, be))(t, y) - apdmd_field(p, params(al, 0.0))(t, y);
  const Vector x = y.head(4);
  EXPECT_LE((d.segment(4, 4) + (t / al) * be * p.a.transpose() * (p.a * x - p.b)).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_EQ(d.head(4), Vector::Zero(4));
  EXPECT_EQ(d.tail(4), Vector::Zero(4));
}

TEST(Fields, SingleNodeMonotropicIsCentralizedWithoutAugmentation) {
  const auto qp = equality_qp(9, 4, 2);
  const auto& c = qp.problem;
  MonotropicProblem m{"one", {c.objective}, {c.mirror}, {c.a}, {c.b}, Graph::path(1), c.start, std::nullopt};
  const auto fm = admd_field(m, params(3.0, 1.0));
  const auto fc = apdmd_field(c, params(3.0, 0.0));
  SeededRng rng(10);
  for (int i = 0; i < 10; ++i) {
    const Vector y = random_state(rng, fm.dim());
    const double t = 1.0 + rng.uniform() * 5;
    const Vector dm = fm(t, y);
    EXPECT_LE((dm.head(12) - fc(t, y.head(12))).lpNorm<Eigen::Infinity>(), 1e-12 * dm.norm());
    EXPECT_EQ(dm.tail(2), Vector::Zero(2));  // z' = -L v with L = 0
  }
}

TEST(Fields, ApdpdNeedsProjectionMap) {
  EXPECT_THROW(apdpd_field(build_scalar(), params(2.0, 1.0)), UnsupportedError);
  auto p = build_scalar();
  p.mirror = MirrorMap::projection(Projector::box(Vector::Constant(1, -5.0), Vector::Constant(1, 5.0)));
  const auto f = apdpd_field(p, params(2.0, 1.0));
  Vector y(4);
  y << 0.0, 9.0, 0.0, 0.0;
  EXPECT_NEAR(f(2.0, y)(0), (2.0 / 2.0) * 5.0, 1e-15);  // x' uses P(u) = 5
}

TEST(Fields, ParameterErrors) {
  EXPECT_THROW(apdmd_field(build_scalar(), params(1.5, 1.0)), ParameterError);
  EXPECT_THROW(apdmd_field(build_scalar(), params(2.0, -1.0)), ParameterError);
  EXPECT_THROW(sapdmd_field(build_nbp(), params(2.0, 1.0)), ParameterError);
  EXPECT_THROW(apdmd_field(build_nbp(), params(2.0, 1.0)), UnsupportedError);
  SystemParams slow = params(3.0, 1.0);
  slow.mu = MuSchedule(1.0, 2.0, 1.0);
  EXPECT_THROW(sapdmd_field(build_nbp(), slow), ParameterError);
  EXPECT_THROW(apdmd_field(build_scalar(), params(2.0, 1.0))(0.0, Vector::Zero(4)), DomainError);
  EXPECT_THROW(apdmd_field(build_scalar(), params(2.0, 1.0))(1.0, Vector::Zero(3)), SizeError);
}

TEST(InitialState, DualsReproduceTheStartPoint) {
  const auto nbp = build_nbp();
  const auto s = initial_state(nbp);
  EXPECT_LE((s.x - nbp.start).lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_EQ(s.lambda, Vector::Zero(10));
  const auto lr = initial_state(build_logistic_centralized());
  EXPECT_EQ(lr.u, Vector::Zero(4));
  EXPECT_LE((lr.x - Vector::Constant(4, 0.25)).lpNorm<Eigen::Infinity>(), 1e-15);
  const auto dl = initial_state(build_dis_logistic());
  EXPECT_LE((dl.x.segment(4, 4) - Vector::Ones(4)).lpNorm<Eigen::Infinity>(), 1e-15);
  const auto qp = initial_state(build_dist_qp());
  ASSERT_TRUE(qp.y && qp.z);
  EXPECT_EQ(qp.x.head(5), Vector::Constant(5, 2.0));  // start 0 projected into [2, 3]
}

TEST(SecondOrder, MatchesFirstOrderTrajectory) {
  // negative entropy map, so grad psi and the Hessian of psi* are both nontrivial
  SeededRng rng(11);
  const Index n = 4;
  Matrix a = random_gaussian_matrix(rng, 1, n).cwiseAbs();
  Vector xs = Vector::Constant(n, 0.5);
  ConstrainedProblem p{"ent", Objective::quadratic(Matrix::Identity(n, n), -Vector::Ones(n)), a, a * xs,
                       MirrorMap::negative_entropy(n), Vector::Constant(n, 0.3), std::nullopt};
  const auto prm = params(3.0, 1.0);
  const auto f1 = apdmd_field(p, prm);
  const auto f2 = apdmd_second_order_field(p, prm);
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-11;
  cfg.abs_tol = 1e-13;
  cfg.points_per_decade = 10;
  const Vector y1 = pack(f1.layout(), initial_state(p));
  const auto t1 = integrate(f1, y1, 1.0, 20.0, cfg);
  const auto t2 = integrate(f2, to_second_order(f1.layout(), p.mirror, 1.0, prm.alpha, y1), 1.0, 20.0, cfg);
  ASSERT_TRUE(t1.ok() && t2.ok());
  ASSERT_EQ(t1.size(), t2.size());
  for (std::size_t k = 0; k < t1.size(); ++k) {
    EXPECT_LE((t1.states[k].head(n) - t2.states[k].head(n)).lpNorm<Eigen::Infinity>(), 1e-7);
    EXPECT_LE((t1.states[k].segment(2 * n, 1) - t2.states[k].segment(2 * n, 1)).lpNorm<Eigen::Infinity>(), 1e-7);
  }
  auto boxed = build_scalar();
  boxed.mirror = MirrorMap::projection(Projector::box(Vector::Zero(1), Vector::Ones(1)));
  EXPECT_THROW(apdmd_second_order_field(boxed, prm), UnsupportedError);
}

TEST(State, PackUnpackRoundTrip) {
  const StateLayout l{3, 2, 2};
  SeededRng rng(12);
  const Vector y = random_gaussian_vector(rng, l.size());
  EXPECT_EQ(pack(l, unpack(l, y)), y);
  auto s = unpack(l, y);
  s.z.reset();
  EXPECT_THROW(pack(l, s), SizeError);
}
