#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mirrorflow/graph.hpp"
#include "mirrorflow/mirror_maps.hpp"
#include "mirrorflow/numerics.hpp"
#include "mirrorflow/smoothing.hpp"

namespace mirrorflow {

enum class ObjectiveShape { General, L1Norm };

// Either a smooth f with gradient, or a nonsmooth f with a smoothing surrogate f^(x, mu).
class Objective {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradFn = std::function<Vector(const Vector&)>;
  using SmoothValueFn = std::function<double(const Vector&, double)>;
  using SmoothGradFn = std::function<Vector(const Vector&, double)>;

  static Objective smooth(Index dim, ValueFn f, GradFn g) {
    Objective o(dim);
    o.f_ = std::move(f);
    o.g_ = std::move(g);
    return o;
  }

  static Objective smoothed(Index dim, ValueFn f, SmoothValueFn fh, SmoothGradFn gh, double kappa,
                            ObjectiveShape shape = ObjectiveShape::General) {
    if (!(kappa >= 0.0)) throw ParameterError("smoothing constant kappa must be nonnegative");
    Objective o(dim);
    o.f_ = std::move(f);
    o.fh_ = std::move(fh);
    o.gh_ = std::move(gh);
    o.kappa_ = kappa;
    o.shape_ = shape;
    return o;
  }

  // |x|_1 smoothed coordinatewise by smooth_abs.
  static Objective l1(Index dim) {
    return smoothed(
        dim, [](const Vector& x) { return x.lpNorm<1>(); },
        [](const Vector& x, double mu) { return smooth_l1(x, mu).value; },
        [](const Vector& x, double mu) { return smooth_l1(x, mu).grad; }, smooth_l1_kappa(dim),
        ObjectiveShape::L1Norm);
  }

  // x^T Q x + c^T x
  static Objective quadratic(Matrix q, Vector c) {
    require_size(q.cols(), q.rows(), "quadratic form");
    require_size(c.size(), q.rows(), "quadratic linear term");
    auto qs = std::make_shared<Matrix>(std::move(q));
    auto cs = std::make_shared<Vector>(std::move(c));
    return smooth(
        qs->rows(), [qs, cs](const Vector& x) { return x.dot(*qs * x) + cs->dot(x); },
        [qs, cs](const Vector& x) -> Vector { return *qs * x + qs->transpose() * x + *cs; });
  }

  // log(1 + exp(-w^T x))
  static Objective logistic(Vector w) {
    auto ws = std::make_shared<Vector>(std::move(w));
    return smooth(
        ws->size(),
        [ws](const Vector& x) {
          const double s = ws->dot(x);
          return std::log1p(std::exp(-std::abs(s))) + std::max(-s, 0.0);
        },
        [ws](const Vector& x) -> Vector {
          const double s = ws->dot(x);
          const double sig = s >= 0.0 ? std::exp(-s) / (1.0 + std::exp(-s)) : 1.0 / (1.0 + std::exp(s));
          return -sig * *ws;
        });
  }

  // Sum of parts acting on consecutive blocks.
  static Objective stack(const std::vector<Objective>& parts) {
    if (parts.empty()) throw SizeError("stack: no parts");
    auto ps = std::make_shared<std::vector<Objective>>(parts);
    Index dim = 0;
    double kappa = 0.0;
    bool smooth_all = true, smoothed_all = true, l1_all = true;
    for (const auto& p : parts) {
      dim += p.dim();
      kappa += p.kappa();
      smooth_all = smooth_all && p.is_smooth();
      smoothed_all = smoothed_all && !p.is_smooth();
      l1_all = l1_all && p.shape() == ObjectiveShape::L1Norm;
    }
    if (!smooth_all && !smoothed_all) throw UnsupportedError("stack: mixing smooth and smoothed parts");
    auto each = [ps](const Vector& x, auto&& fn) {
      Index off = 0;
      for (const auto& p : *ps) {
        fn(p, off, x.segment(off, p.dim()));
        off += p.dim();
      }
    };
    ValueFn f = [each](const Vector& x) {
      double s = 0.0;
      each(x, [&](const Objective& p, Index, const Vector& xi) { s += p.value(xi); });
      return s;
    };
    if (smooth_all) {
      return smooth(dim, f, [each](const Vector& x) {
        Vector g(x.size());
        each(x, [&](const Objective& p, Index off, const Vector& xi) { g.segment(off, p.dim()) = p.gradient(xi); });
        return g;
      });
    }
    return smoothed(
        dim, f,
        [each](const Vector& x, double mu) {
          double s = 0.0;
          each(x, [&](const Objective& p, Index, const Vector& xi) { s += p.smoothed_value(xi, mu); });
          return s;
        },
        [each](const Vector& x, double mu) {
          Vector g(x.size());
          each(x, [&](const Objective& p, Index off, const Vector& xi) {
            g.segment(off, p.dim()) = p.smoothed_gradient(xi, mu);
          });
          return g;
        },
        kappa, l1_all ? ObjectiveShape::L1Norm : ObjectiveShape::General);
  }

  Index dim() const { return dim_; }
  bool is_smooth() const { return static_cast<bool>(g_); }
  ObjectiveShape shape() const { return shape_; }
  double kappa() const { return kappa_; }

  double value(const Vector& x) const {
    require_size(x.size(), dim_, "objective argument");
    return f_(x);
  }
  Vector gradient(const Vector& x) const {
    if (!g_) throw UnsupportedError("objective is nonsmooth, use the smoothed gradient");
    require_size(x.size(), dim_, "objective argument");
    return g_(x);
  }
  // A smooth objective is its own surrogate with kappa = 0.
  double smoothed_value(const Vector& x, double mu) const {
    if (g_) return value(x);
    require_size(x.size(), dim_, "objective argument");
    return fh_(x, mu);
  }
  Vector smoothed_gradient(const Vector& x, double mu) const {
    if (g_) return gradient(x);
    require_size(x.size(), dim_, "objective argument");
    return gh_(x, mu);
  }

 private:
  explicit Objective(Index dim) : dim_(dim) {
    if (dim < 1) throw SizeError("objective: dimension < 1");
  }

  Index dim_;
  ValueFn f_;
  GradFn g_;
  SmoothValueFn fh_;
  SmoothGradFn gh_;
  double kappa_ = 0.0;
  ObjectiveShape shape_ = ObjectiveShape::General;
};

// min f(x) s.t. A x = b, x in X (X carried by the mirror map).
struct ConstrainedProblem {
  std::string name;
  Objective objective;
  Matrix a;
  Vector b;
  MirrorMap mirror;
  Vector start;                   // primal start for maps that need an interior point
  std::optional<Vector> planted;  // ground truth signal, when there is one

  Index dim() const { return a.cols(); }
  Index rows() const { return a.rows(); }

  void validate() const {
    require_size(b.size(), a.rows(), name + ": b");
    require_size(mirror.dim(), a.cols(), name + ": mirror map");
    require_size(objective.dim(), a.cols(), name + ": objective");
    require_size(start.size(), a.cols(), name + ": start");
  }
};

// min sum_i f_i(x_i) s.t. L x = 0, x_i in X_i.
struct ConsensusProblem {
  std::string name;
  std::vector<Objective> agents;
  std::vector<MirrorMap> mirrors;
  Graph graph;
  Index block;
  Vector start;  // stacked
  std::optional<Vector> planted;

  Index nodes() const { return graph.nodes(); }
  Index dim() const { return nodes() * block; }

  void validate() const {
    if (static_cast<Index>(agents.size()) != nodes() || static_cast<Index>(mirrors.size()) != nodes())
      throw SizeError(name + ": one objective and one mirror map per agent");
    for (std::size_t i = 0; i < agents.size(); ++i) {
      require_size(agents[i].dim(), block, name + ": agent objective");
      require_size(mirrors[i].dim(), block, name + ": agent mirror map");
    }
    require_size(start.size(), dim(), name + ": start");
    if (!graph.is_connected()) throw DomainError(name + ": graph is not connected");
  }
};

// min sum_i f_i(x_i) s.t. sum_i A_i x_i = sum_i d_i, x_i in X_i,
// handled as A_bar x - d + L y = 0 with A_bar = blkdiag(A_i).
struct MonotropicProblem {
  std::string name;
  std::vector<Objective> agents;
  std::vector<MirrorMap> mirrors;
  std::vector<Matrix> a_blocks;  // m x p_i
  std::vector<Vector> d_blocks;  // m
  Graph graph;
  Vector start;
  std::optional<Vector> planted;

  Index nodes() const { return graph.nodes(); }
  Index coupling() const { return a_blocks.front().rows(); }
  Index dim() const {
    Index p = 0;
    for (const auto& a : a_blocks) p += a.cols();
    return p;
  }
  Index dual_dim() const { return nodes() * coupling(); }

  Matrix a_bar() const { return block_diagonal(a_blocks); }
  Vector d() const {
    Vector out(dual_dim());
    for (Index i = 0; i < nodes(); ++i) out.segment(i * coupling(), coupling()) = d_blocks[static_cast<std::size_t>(i)];
    return out;
  }
  // [A_1 ... A_n] and sum_i d_i, the centralised coupling constraint
  Matrix a_joined() const {
    Matrix out(coupling(), dim());
    Index off = 0;
    for (const auto& a : a_blocks) {
      out.middleCols(off, a.cols()) = a;
      off += a.cols();
    }
    return out;
  }
  Vector d_sum() const {
    Vector s = Vector::Zero(coupling());
    for (const auto& d : d_blocks) s += d;
    return s;
  }

  void validate() const {
    const auto n = static_cast<std::size_t>(nodes());
    if (agents.size() != n || mirrors.size() != n || a_blocks.size() != n || d_blocks.size() != n)
      throw SizeError(name + ": per-agent data must match the node count");
    for (std::size_t i = 0; i < n; ++i) {
      require_size(a_blocks[i].rows(), coupling(), name + ": coupling rows");
      require_size(d_blocks[i].size(), coupling(), name + ": d block");
      require_size(agents[i].dim(), a_blocks[i].cols(), name + ": agent objective");
      require_size(mirrors[i].dim(), a_blocks[i].cols(), name + ": agent mirror map");
    }
    require_size(start.size(), dim(), name + ": start");
    if (!graph.is_connected()) throw DomainError(name + ": graph is not connected");
  }
};

// ---------------------------------------------------------------------------
// Catalogue instances

// min x^2 / 2 s.t. x = 1
inline ConstrainedProblem build_scalar() {
  ConstrainedProblem p{"scalar",
                       Objective::quadratic(Matrix::Constant(1, 1, 0.5), Vector::Zero(1)),
                       Matrix::Ones(1, 1),
                       Vector::Ones(1),
                       MirrorMap::euclidean(1),
                       Vector::Zero(1),
                       std::nullopt};
  p.validate();
  return p;
}

inline ConstrainedProblem build_logistic_centralized() {
  Matrix a(2, 4);
  a << 0.2, 1, 1, 2, 0, 1, 0.5, 1;
  ConstrainedProblem p{"logregress",
                       Objective::logistic(Vector::Ones(4)),
                       a,
                       Vector::Ones(2),
                       MirrorMap::simplex_entropy(4),
                       Vector::Constant(4, 0.25),
                       std::nullopt};
  p.validate();
  return p;
}

inline ConsensusProblem build_dis_logistic() {
  std::vector<Objective> agents;
  for (int i = 1; i <= 4; ++i) {
    Vector w(4);
    w << i - 1, 0.5 * i, i, i + 1;
    agents.push_back(Objective::logistic(w));
  }
  Vector c(4);
  c << 0.1, 0.2, 0.5, 0.8;
  std::vector<MirrorMap> maps{MirrorMap::simplex_entropy(4), MirrorMap::itakura_saito(4),
                              MirrorMap::projection(Projector::sphere(c, 2.0)),
                              MirrorMap::projection(Projector::half_space(Vector::Ones(4), 4.0))};
  Vector start(16);
  start << Vector::Constant(4, 0.25), Vector::Ones(4), Vector::Zero(4), Vector::Zero(4);
  ConsensusProblem p{"dis_log", agents, maps, Graph::ring(4), 4, start, std::nullopt};
  p.validate();
  return p;
}

// Agent i (0-based) owns x_i in [i+2, i+3]^5 and f_i = x_i^T A_i x_i; coupling sum_i x_i = sum_i 7.
inline MonotropicProblem build_dist_qp(std::uint64_t seed = 1) {
  const Index n = 10, m = 5;
  SeededRng rng(seed);
  std::vector<Objective> agents;
  std::vector<MirrorMap> maps;
  std::vector<Matrix> a_blocks;
  std::vector<Vector> d_blocks;
  for (Index i = 0; i < n; ++i) {
    SeededRng sub = rng.split(static_cast<std::uint64_t>(i));
    agents.push_back(Objective::quadratic(random_psd(sub, m), Vector::Zero(m)));
    const double lo = static_cast<double>(i) + 2.0;
    maps.push_back(MirrorMap::projection(Projector::box(Vector::Constant(m, lo), Vector::Constant(m, lo + 1.0))));
    a_blocks.push_back(Matrix::Identity(m, m));
    d_blocks.push_back(Vector::Constant(m, 7.0));
  }
  MonotropicProblem p{"d_sp", agents, maps, a_blocks, d_blocks, Graph::ring(n), Vector::Zero(n * m), std::nullopt};
  p.validate();
  return p;
}

namespace detail {
// k-sparse signal in R^n with amplitudes in [0.5, 1.5], random signs unless nonnegative.
inline Vector planted_sparse(SeededRng& rng, Index n, Index k, bool nonnegative) {
  Vector x = Vector::Zero(n);
  Index placed = 0;
  while (placed < k) {
    const Index j = rng.below(n);
    if (x(j) != 0.0) continue;
    double amp = rng.uniform(0.5, 1.5);
    if (!nonnegative && rng.uniform() < 0.5) amp = -amp;
    x(j) = amp;
    ++placed;
  }
  return x;
}
}  // namespace detail

inline constexpr std::uint64_t kDefaultNbpSeed = 7;
inline constexpr std::uint64_t kDefaultBpSeed = 7;

// min |x|_1 s.t. A x = b, x >= 0 with A 10 x 40, orthonormal rows, and a planted 2-sparse signal.
inline ConstrainedProblem build_nbp(std::uint64_t seed = kDefaultNbpSeed) {
  SeededRng rng(seed);
  Matrix a = random_orthonormal_rows(rng, 10, 40);
  Vector x0 = detail::planted_sparse(rng, 40, 2, true);
  Vector b = a * x0;
  ConstrainedProblem p{"nbp",
                       Objective::l1(40),
                       a,
                       b,
                       MirrorMap::negative_entropy(40),
                       Vector::Constant(40, 0.05),
                       x0};
  p.validate();
  return p;
}

namespace detail {
struct BasisPursuitData {
  Matrix a;
  Vector x0, b;
};
inline BasisPursuitData basis_pursuit_data(std::uint64_t seed) {
  SeededRng rng(seed);
  Matrix a = random_orthonormal_rows(rng, 10, 60);
  Vector x0 = planted_sparse(rng, 60, 2, false);
  Vector b = a * x0;
  return {a, x0, b};
}
}  // namespace detail

// Row partition: 5 agents each holding 2 rows of A, local sets {x : A_i x = b_i}.
inline ConsensusProblem build_dbp_row(std::uint64_t seed = kDefaultBpSeed) {
  const auto data = detail::basis_pursuit_data(seed);
  const Index k = 5, n = 60, rows = 2;
  std::vector<Objective> agents;
  std::vector<MirrorMap> maps;
  for (Index i = 0; i < k; ++i) {
    agents.push_back(Objective::l1(n));
    maps.push_back(MirrorMap::projection(
        Projector::affine(data.a.middleRows(i * rows, rows), data.b.segment(i * rows, rows))));
  }
  Vector planted(k * n);
  for (Index i = 0; i < k; ++i) planted.segment(i * n, n) = data.x0;
  ConsensusProblem p{"d_bp_r", agents, maps, Graph::ring(k), n, Vector::Zero(k * n), planted};
  p.validate();
  return p;
}

// Column partition: 10 agents each holding 6 columns of A, d_i = b / 10.
inline MonotropicProblem build_dbp_col(std::uint64_t seed = kDefaultBpSeed) {
  const auto data = detail::basis_pursuit_data(seed);
  const Index q = 10, cols = 6;
  std::vector<Objective> agents;
  std::vector<MirrorMap> maps;
  std::vector<Matrix> a_blocks;
  std::vector<Vector> d_blocks;
  for (Index i = 0; i < q; ++i) {
    agents.push_back(Objective::l1(cols));
    maps.push_back(MirrorMap::euclidean(cols));
    a_blocks.push_back(data.a.middleCols(i * cols, cols));
    d_blocks.push_back(data.b / static_cast<double>(q));
  }
  MonotropicProblem p{"d_bp_c", agents, maps, a_blocks, d_blocks, Graph::ring(q), Vector::Zero(60), data.x0};
  p.validate();
  return p;
}

inline Objective stacked_objective(const ConsensusProblem& p) { return Objective::stack(p.agents); }
inline Objective stacked_objective(const MonotropicProblem& p) { return Objective::stack(p.agents); }

}  // namespace mirrorflow
