#include "dissipnet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace dissipnet::numerics {

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw NotSymmetric("matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  const std::size_t n = m.rows();
  const double scale = std::max(1.0, max_abs(m));
  m_ = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-8 * scale) {
        throw NotSymmetric("entry (" + std::to_string(i) + "," + std::to_string(j) + ") differs from its transpose");
      }
      m_(i, j) = 0.5 * (m(i, j) + m(j, i));
    }
  }
}

EigenDecomposition eigen_sym(const SymMatrix& sym) {
  const std::size_t n = sym.dim();
  EigenDecomposition out{Vector(n), Matrix(n, n)};
  if (n == 0) return out;
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> a(sym.matrix().data().data(), static_cast<Eigen::Index>(n),
                                     static_cast<Eigen::Index>(n));
  // Eigenvalues come back in ascending order.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NotSymmetric("eigensolver did not converge");
  Eigen::Map<Eigen::VectorXd>(out.values.data(), static_cast<Eigen::Index>(n)) = es.eigenvalues();
  Eigen::Map<RowMajor>(out.vectors.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) =
      es.eigenvectors();
  return out;
}

double min_eigenvalue(const SymMatrix& m) {
  return m.dim() == 0 ? 0.0 : eigen_sym(m).values.front();
}

double max_eigenvalue(const SymMatrix& m) {
  return m.dim() == 0 ? 0.0 : eigen_sym(m).values.back();
}

SymMatrix psd_sqrt(const SymMatrix& m) {
  const auto e = eigen_sym(m);
  if (!e.values.empty() && e.values.front() < -kTolPsd) {
    throw NotPSD("smallest eigenvalue " + std::to_string(e.values.front()));
  }
  return spectral_map(e, [](double l) { return l > 0.0 ? std::sqrt(l) : 0.0; });
}

SymMatrix ramp_eig(const SymMatrix& m) {
  return spectral_map(eigen_sym(m), [](double l) { return l > 0.0 ? l : 0.0; });
}

SymMatrix pd_inv_sqrt(const SymMatrix& m) {
  const auto e = eigen_sym(m);
  if (!e.values.empty() && e.values.front() <= kTolPd) {
    throw NotPSD("matrix is not positive definite (smallest eigenvalue " + std::to_string(e.values.front()) + ")");
  }
  return spectral_map(e, [](double l) { return 1.0 / std::sqrt(l); });
}

SymMatrix pd_inverse(const SymMatrix& m) {
  const auto e = eigen_sym(m);
  if (!e.values.empty() && e.values.front() <= kTolPd) {
    throw NotPSD("matrix is not positive definite (smallest eigenvalue " + std::to_string(e.values.front()) + ")");
  }
  return spectral_map(e, [](double l) { return 1.0 / l; });
}

Matrix angle_of(const Matrix& x) {
  const SymMatrix gram(matmul(x.transpose(), x));
  const auto e = eigen_sym(gram);
  if (e.values.empty() || e.values.front() <= kTolRank) {
    throw RankDeficient("smallest eigenvalue of X^T X is " +
                        std::to_string(e.values.empty() ? 0.0 : e.values.front()));
  }
  return matmul(x, spectral_map(e, [](double l) { return 1.0 / std::sqrt(l); }).matrix());
}

Ellipsoid::Ellipsoid(SymMatrix a, Matrix b, SymMatrix c)
    : shape(std::move(a)), center(std::move(b)), radius(std::move(c)) {
  if (shape.dim() != center.rows() || radius.dim() != center.cols()) {
    throw DimensionMismatch("ellipsoid blocks: A " + std::to_string(shape.dim()) + ", B " +
                            std::to_string(center.rows()) + "x" + std::to_string(center.cols()) + ", C " +
                            std::to_string(radius.dim()));
  }
  if (min_eigenvalue(shape) <= kTolPd) throw NotPSD("ellipsoid shape must be positive definite");
  if (min_eigenvalue(radius) < -kTolPsd) throw NotPSD("ellipsoid radius must be positive semi-definite");
}

SymMatrix ellipsoid_gram(const Ellipsoid& e, const Matrix& x) {
  const Matrix y = x - e.center;
  return SymMatrix(matmul(y.transpose(), matmul(e.shape.matrix(), y)));
}

double ellipsoid_violation(const Ellipsoid& e, const Matrix& x) {
  return max_eigenvalue(SymMatrix(ellipsoid_gram(e, x).matrix() - e.radius.matrix()));
}

SymMatrix clamp_to_radius(const SymMatrix& m, const SymMatrix& radius) {
  const auto ce = eigen_sym(radius);
  const double cutoff = kTolRank * std::max(1.0, std::abs(ce.values.back()));
  const SymMatrix c_half = spectral_map(ce, [](double l) { return l > 0.0 ? std::sqrt(l) : 0.0; });
  const SymMatrix c_pinv_half = spectral_map(ce, [&](double l) { return l > cutoff ? 1.0 / std::sqrt(l) : 0.0; });
  const SymMatrix whitened(matmul(c_pinv_half.matrix(), matmul(m.matrix(), c_pinv_half.matrix())));
  const SymMatrix capped = spectral_map(eigen_sym(whitened), [](double l) { return std::clamp(l, 0.0, 1.0); });
  return SymMatrix(matmul(c_half.matrix(), matmul(capped.matrix(), c_half.matrix())));
}

Matrix ellipsoid_project(const Ellipsoid& e, const Matrix& x) {
  if (x.rows() != e.rows() || x.cols() != e.cols()) throw DimensionMismatch("ellipsoid_project input shape");
  const SymMatrix gram = ellipsoid_gram(e, x);
  const double scale = std::max(1.0, max_abs(e.radius.matrix()));
  if (max_eigenvalue(SymMatrix(gram.matrix() - e.radius.matrix())) <= kTolPsd * scale) return x;

  const Matrix direction = angle_of(matmul(psd_sqrt(e.shape).matrix(), x - e.center));
  const SymMatrix clamped = clamp_to_radius(gram, e.radius);
  return e.center + matmul(pd_inv_sqrt(e.shape).matrix(), matmul(direction, psd_sqrt(clamped).matrix()));
}

}  // namespace dissipnet::numerics
