#include "lqt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace lqt::linalg {

Matrix expm(const Matrix& m) { return m.exp(); }

double spectral_abscissa(const Matrix& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("eigenvalue computation failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

double norm2_bound(const Matrix& m) {
  const double one = m.cwiseAbs().colwise().sum().maxCoeff();
  const double inf = m.cwiseAbs().rowwise().sum().maxCoeff();
  return std::sqrt(one * inf);
}

namespace {

// Swaps the adjacent diagonal entries k and k+1 of the upper triangular t
// with a unitary rotation, updating q so that q t q^* is unchanged.
void swap_adjacent(ComplexMatrix& t, ComplexMatrix& q, Eigen::Index k) {
  using C = std::complex<double>;
  const C t11 = t(k, k);
  const C t22 = t(k + 1, k + 1);
  // Eigenvector of the 2x2 block for t22.
  const C v0 = t(k, k + 1);
  const C v1 = t22 - t11;
  const double nv = std::hypot(std::abs(v0), std::abs(v1));
  if (nv == 0.0) return;
  Eigen::Matrix2cd g;
  g << v0 / nv, -std::conj(v1) / nv, v1 / nv, std::conj(v0) / nv;
  t.middleCols(k, 2) = t.middleCols(k, 2) * g;
  t.middleRows(k, 2) = g.adjoint() * t.middleRows(k, 2);
  q.middleCols(k, 2) = q.middleCols(k, 2) * g;
  t(k, k) = t22;
  t(k + 1, k + 1) = t11;
  t(k + 1, k) = 0.0;
}

}  // namespace

OrderedSchur ordered_schur(const Matrix& m) {
  Eigen::ComplexSchur<ComplexMatrix> schur(m.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success) {
    throw ConvergenceError("complex Schur decomposition failed");
  }
  OrderedSchur out;
  out.t = schur.matrixT();
  out.q = schur.matrixU();
  const Eigen::Index size = m.rows();
  out.min_abs_real = std::numeric_limits<double>::infinity();
  int placed = 0;
  for (Eigen::Index i = 0; i < size; ++i) {
    const double re = out.t(i, i).real();
    out.min_abs_real = std::min(out.min_abs_real, std::abs(re));
    if (re < 0.0) {
      for (Eigen::Index j = i; j > placed; --j) swap_adjacent(out.t, out.q, j - 1);
      ++placed;
    }
  }
  out.stable_count = placed;
  return out;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  Eigen::ComplexSchur<ComplexMatrix> schur(a.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success) {
    throw ConvergenceError("complex Schur decomposition failed");
  }
  const ComplexMatrix& t = schur.matrixT();
  const ComplexMatrix& u = schur.matrixU();
  // a = U T U^*, so a^T = U T^* U^* and T^* Y + Y T = F with Y = U^* X U.
  const ComplexMatrix f = -(u.adjoint() * q.cast<std::complex<double>>() * u);
  const ComplexMatrix t_adj = t.adjoint();
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXcd rhs = f.col(j);
    if (j > 0) rhs -= y.leftCols(j) * t.col(j).head(j);
    ComplexMatrix lhs = t_adj;
    lhs.diagonal().array() += t(j, j);
    if (lhs.diagonal().cwiseAbs().minCoeff() < 1e-14 * scale) {
      throw ConvergenceError("Lyapunov equation is singular (a and -a share an eigenvalue)");
    }
    y.col(j) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  const Matrix x = (u * y * u.adjoint()).real();
  return symmetrize(x);
}

}  // namespace lqt::linalg
