#pragma once

// Spectral tools for small symmetric matrices and the matrix-ellipsoid
// projection built on them.

#include <span>

#include "dissipnet/matrix.hpp"

namespace dissipnet::numerics {

inline constexpr double kTolPsd = 1e-9;
inline constexpr double kTolPd = 1e-12;
inline constexpr double kTolRank = 1e-10;

// Square matrix that is symmetric by construction. Ingestion averages
// (M + M^T)/2 after checking the asymmetry is only round-off.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);
  static SymMatrix identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }
  static SymMatrix zero(std::size_t n) { return SymMatrix(Matrix(n, n)); }
  static SymMatrix diag(std::span<const double> d) { return SymMatrix(Matrix::diag(d)); }

  std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }
  operator const Matrix&() const noexcept { return m_; }

 private:
  Matrix m_;
};

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column k is the eigenvector of values[k]
};

// Cyclic Jacobi rotations.
EigenDecomposition eigen_sym(const SymMatrix& m);

// Rebuilds V diag(fn(lambda)) V^T.
template <class Fn>
SymMatrix spectral_map(const EigenDecomposition& e, Fn&& fn) {
  const std::size_t n = e.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = fn(e.values[k]);
    if (s == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = e.vectors(i, k) * s;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * e.vectors(j, k);
    }
  }
  return SymMatrix(out);
}

double min_eigenvalue(const SymMatrix& m);
double max_eigenvalue(const SymMatrix& m);

SymMatrix psd_sqrt(const SymMatrix& m);
SymMatrix ramp_eig(const SymMatrix& m);
// Inverse square root of a positive definite matrix.
SymMatrix pd_inv_sqrt(const SymMatrix& m);
// Inverse of a positive definite matrix.
SymMatrix pd_inverse(const SymMatrix& m);

// X (X^T X)^{-1/2}; orthonormal columns spanning range(X).
Matrix angle_of(const Matrix& x);

// The set {X : (X - center)^T shape (X - center) <= radius} in the Loewner order.
struct Ellipsoid {
  SymMatrix shape;   // A, positive definite, n x n
  Matrix center;     // B, n x m
  SymMatrix radius;  // C, positive semi-definite, m x m

  Ellipsoid(SymMatrix a, Matrix b, SymMatrix c);
  std::size_t rows() const noexcept { return center.rows(); }
  std::size_t cols() const noexcept { return center.cols(); }
};

// (X - B)^T A (X - B)
SymMatrix ellipsoid_gram(const Ellipsoid& e, const Matrix& x);
// max eigenvalue of (X - B)^T A (X - B) - C; <= 0 means X is a member.
double ellipsoid_violation(const Ellipsoid& e, const Matrix& x);

// Loewner clamp of a PSD matrix against the radius: the result D satisfies
// 0 <= D <= C, and D == M whenever M <= C. Reduces to C - Ramp(C - M) when
// M and C commute.
SymMatrix clamp_to_radius(const SymMatrix& m, const SymMatrix& radius);

// B + A^{-1/2} Angle(sqrt(A)(X - B)) sqrt(D), D = clamp_to_radius(gram, C).
// Members (within kTolPsd) are returned unchanged.
Matrix ellipsoid_project(const Ellipsoid& e, const Matrix& x);

}  // namespace dissipnet::numerics
