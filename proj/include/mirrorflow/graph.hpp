#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mirrorflow/numerics.hpp"

namespace mirrorflow {

struct Edge {
  Index a, b;
  double weight = 1.0;
};

// Undirected weighted graph on nodes 0..n-1.
class Graph {
 public:
  Graph(Index n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n < 1) throw SizeError("graph: need at least one node");
    for (const auto& e : edges_) {
      if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n)
        throw SizeError("graph: edge endpoint out of range");
      if (e.a == e.b) throw DomainError("graph: self loop at node " + std::to_string(e.a));
      if (!(e.weight > 0.0)) throw DomainError("graph: edge weights must be positive");
    }
  }

  static Graph ring(Index n) {
    if (n < 3) throw ParameterError("ring: need n >= 3");
    std::vector<Edge> e;
    for (Index i = 0; i < n; ++i) e.push_back({i, (i + 1) % n});
    return Graph(n, std::move(e));
  }
  static Graph path(Index n) {
    std::vector<Edge> e;
    for (Index i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
    return Graph(n, std::move(e));
  }
  static Graph complete(Index n) {
    std::vector<Edge> e;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) e.push_back({i, j});
    return Graph(n, std::move(e));
  }

  Index nodes() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }

  Matrix adjacency() const {
    Matrix w = Matrix::Zero(n_, n_);
    for (const auto& e : edges_) {
      w(e.a, e.b) += e.weight;
      w(e.b, e.a) += e.weight;
    }
    return w;
  }

  bool is_connected() const {
    std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n_));
    for (const auto& e : edges_) {
      adj[static_cast<std::size_t>(e.a)].push_back(e.b);
      adj[static_cast<std::size_t>(e.b)].push_back(e.a);
    }
    std::vector<char> seen(static_cast<std::size_t>(n_), 0);
    std::vector<Index> stack{0};
    seen[0] = 1;
    Index count = 1;
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (Index w : adj[static_cast<std::size_t>(v)])
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          ++count;
          stack.push_back(w);
        }
    }
    return count == n_;
  }

 private:
  Index n_;
  std::vector<Edge> edges_;
};

// L_n = D - W
inline Matrix laplacian(const Graph& g) {
  Matrix w = g.adjacency();
  Matrix l = -w;
  l.diagonal() = w.rowwise().sum();
  return l;
}

// L = L_n (x) I_m acting on stacked agent blocks of size m.
class LiftedLaplacian {
 public:
  LiftedLaplacian(const Graph& g, Index m) : ln_(laplacian(g)), m_(m) {
    if (m < 1) throw SizeError("lifted laplacian: block size < 1");
  }

  Index agents() const { return ln_.rows(); }
  Index block() const { return m_; }
  Index dim() const { return ln_.rows() * m_; }
  const Matrix& node_laplacian() const { return ln_; }

  Matrix full() const { return kron(ln_, Matrix::Identity(m_, m_)); }

  Vector apply(const Vector& x) const {
    require_size(x.size(), dim(), "lifted laplacian argument");
    // row-major: row i of xm is agent block i
    Eigen::Map<const Matrix> xm(x.data(), agents(), m_);
    Vector out(x.size());
    Eigen::Map<Matrix> om(out.data(), agents(), m_);
    om.noalias() = ln_ * xm;
    return out;
  }

 private:
  Matrix ln_;
  Index m_;
};

// x^T L x, the weighted sum of squared disagreements over edges.
inline double consensus_residual(const Graph& g, Index m, const Vector& x) {
  require_size(x.size(), g.nodes() * m, "consensus residual argument");
  double s = 0.0;
  for (const auto& e : g.edges())
    s += e.weight * (x.segment(e.a * m, m) - x.segment(e.b * m, m)).squaredNorm();
  return s;
}

}  // namespace mirrorflow
