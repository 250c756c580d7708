#pragma once

#include <Eigen/Dense>

#include "lqt/common.hpp"

// Dense linear-algebra kernels shared by the operator, Riccati and LQ modules.
namespace lqt::linalg {

using ComplexMatrix = Eigen::MatrixXcd;

// e^{m}. Pade scaling-and-squaring.
Matrix expm(const Matrix& m);

// Largest real part of the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix& m);

// Cheap upper bound on the spectral norm, sqrt(|m|_1 |m|_inf).
double norm2_bound(const Matrix& m);

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Complex Schur form m = Q T Q^* with the eigenvalues of negative real part
// moved to the leading diagonal block.
struct OrderedSchur {
  ComplexMatrix q;
  ComplexMatrix t;
  int stable_count = 0;
  // Smallest |Re(lambda)| over all eigenvalues, for imaginary-axis diagnostics.
  double min_abs_real = 0.0;
};
OrderedSchur ordered_schur(const Matrix& m);

// Solves a^T X + X a + q = 0 for symmetric q by Bartels-Stewart on the complex
// Schur form of a. Throws ConvergenceError when a and -a share an eigenvalue.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

}  // namespace lqt::linalg
