#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mirrorflow/error.hpp"

namespace mirrorflow {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_size(Index got, Index want, const std::string& what) {
  if (got != want)
    throw SizeError(what + ": expected size " + std::to_string(want) + ", got " +
                    std::to_string(got));
}

// Kronecker product a (x) b.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  const auto lim = std::numeric_limits<Index>::max();
  if (a.rows() != 0 && b.rows() > lim / a.rows()) throw SizeError("kron: row count overflows");
  if (a.cols() != 0 && b.cols() > lim / a.cols()) throw SizeError("kron: column count overflows");
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    r += b.rows();
    c += b.cols();
  }
  Matrix out = Matrix::Zero(r, c);
  r = c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

inline Index numerical_rank(const Matrix& a, double rel_tol = 1e-12) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

// Moore-Penrose pseudoinverse. Singular values below rel_tol * sigma_max are dropped.
// Full row rank uses A^T (A A^T)^{-1}, anything else goes through the SVD.
inline Matrix pseudoinverse(const Matrix& a, double rel_tol = 1e-12) {
  if (a.size() == 0) throw SizeError("pseudoinverse: empty matrix");
  if (!a.allFinite()) throw NumericError("pseudoinverse: non-finite entry");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  if (s(0) == 0.0) throw DomainError("pseudoinverse: zero matrix");
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++rank;
  if (rank == a.rows()) {
    Eigen::MatrixXd gram = a * a.transpose();
    Eigen::MatrixXd inv = gram.llt().solve(Eigen::MatrixXd::Identity(a.rows(), a.rows()));
    return a.transpose() * inv;
  }
  Eigen::MatrixXd sinv = Eigen::MatrixXd::Zero(s.size(), s.size());
  for (Index i = 0; i < rank; ++i) sinv(i, i) = 1.0 / s(i);
  return svd.matrixV() * sinv * svd.matrixU().transpose();
}

// Counter based SplitMix64 stream with Box-Muller normals.
// Same seed gives the same sequence on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  Index below(Index n) { return static_cast<Index>(next_u64() % static_cast<std::uint64_t>(n)); }

  // Independent child stream.
  SeededRng split(std::uint64_t stream) const {
    SeededRng tmp(state_ ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
    return SeededRng(tmp.next_u64());
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Vector random_gaussian_vector(SeededRng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.gaussian();
  return v;
}

inline Matrix random_gaussian_matrix(SeededRng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

// G G^T for Gaussian G, symmetrised exactly.
inline Matrix random_psd(SeededRng& rng, Index n) {
  Matrix g = random_gaussian_matrix(rng, n, n);
  Matrix p = g * g.transpose();
  return 0.5 * (p + p.transpose());
}

// Rows orthonormal, Gaussian draw followed by two passes of modified Gram-Schmidt.
inline Matrix random_orthonormal_rows(SeededRng& rng, Index rows, Index cols) {
  if (rows > cols) throw SizeError("random_orthonormal_rows: rows > cols");
  Matrix q(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100) throw NumericError("random_orthonormal_rows: degenerate draws");
      Vector r = random_gaussian_vector(rng, cols);
      const double n0 = r.norm();
      for (int pass = 0; pass < 2; ++pass)
        for (Index k = 0; k < i; ++k) r -= q.row(k).dot(r) * q.row(k).transpose();
      const double n1 = r.norm();
      if (n1 > 1e-8 * n0) {
        q.row(i) = (r / n1).transpose();
        break;
      }
    }
  }
  return q;
}

// Geometric grid from t0 to tf, points_per_decade per factor 10, end points included.
inline std::vector<double> geometric_grid(double t0, double tf, int points_per_decade) {
  if (!(t0 > 0.0) || !(tf > t0)) throw ParameterError("geometric_grid: need 0 < t0 < tf");
  if (points_per_decade < 1) throw ParameterError("geometric_grid: points_per_decade < 1");
  const double decades = std::log10(tf / t0);
  const auto n = static_cast<long>(std::ceil(decades * points_per_decade - 1e-9));
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(n) + 1);
  g.push_back(t0);
  for (long k = 1; k < n; ++k) g.push_back(t0 * std::pow(10.0, decades * static_cast<double>(k) / n));
  g.push_back(tf);
  return g;
}

}  // namespace mirrorflow
