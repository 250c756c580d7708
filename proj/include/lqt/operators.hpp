#pragma once

#include <memory>

#include <Eigen/Sparse>

#include "lqt/common.hpp"

namespace lqt {

// The control triple (A, B, C) on R^n with controls in R^m.
//
// A generates the semigroup e^{tA}, B maps controls into the state space and
// C is a square observation operator. Instances are validated on
// construction and immutable afterwards, so they can be shared read-only
// between threads. Admissibility of B is automatic for matrices and is not
// represented.
class LtiSystem {
 public:
  // Throws InputError on inconsistent dimensions or non-finite entries.
  LtiSystem(Matrix a, Matrix b, Matrix c);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  int n() const { return static_cast<int>(a_.rows()); }
  int m() const { return static_cast<int>(b_.cols()); }

  // B B^T and C^T C, cached.
  const Matrix& bbt() const { return bbt_; }
  const Matrix& ctc() const { return ctc_; }

  // Sparse copy of A when at most a quarter of its entries are nonzero,
  // nullptr otherwise. Used to speed up products in time integrators.
  const Eigen::SparseMatrix<double>* sparse_a() const { return sparse_a_.get(); }

  // Same A and C with a different control operator.
  LtiSystem with_control(Matrix b) const;

 private:
  Matrix a_;
  Matrix b_;
  Matrix c_;
  Matrix bbt_;
  Matrix ctc_;
  std::shared_ptr<const Eigen::SparseMatrix<double>> sparse_a_;
};

LtiSystem make_system(Matrix a, Matrix b, Matrix c);

// A^T x and A x, using the sparse copy of A when available.
Matrix apply_a(const LtiSystem& sys, const Matrix& x);
Matrix apply_at(const LtiSystem& sys, const Matrix& x);

// e^{tA} for t >= 0.
Matrix semigroup(const LtiSystem& sys, double t);

// Yosida approximation of the identity J_k = k (kI - A)^{-1}. Requires k
// above the spectral abscissa of A; a (numerically) singular kI - A is
// reported as an invalid k.
Matrix yosida(const LtiSystem& sys, double k);

// B_k = J_k B.
Matrix approx_control_operator(const LtiSystem& sys, double k);

// int_0^{t0} e^{t M^T} N^T N e^{t M} dt by composite trapezoid on `steps`
// uniform intervals. N may have any number of rows.
Matrix observability_gramian(const Matrix& m, const Matrix& n, double t0, int steps = 2048);

// Numerical evidence for the turnpike hypotheses: observability of (A, C)
// and (A^T, B^T) over [0, t0], trivial kernel intersections, and the
// coercivity constant delta of C^T C.
//
// The Gramian eigenvalues are reported as computed. They are not used for the
// observability flags: for semi-discretized parabolic systems the smallest
// eigenvalue sits far below any sensible relative threshold even though the
// pair is observable. The flags use the Hautus (PBH) eigenvector test instead.
struct HypothesisReport {
  double obs_ac = 0.0;            // smallest eigenvalue of the (A, C) Gramian
  double obs_astar_bstar = 0.0;   // smallest eigenvalue of the (A^T, B^T) Gramian
  bool observable_ac = false;
  bool observable_astar_bstar = false;
  bool ker_ac_trivial = false;
  bool ker_astar_bstar_trivial = false;
  double delta = 0.0;             // sigma_min(C)^2
  double t0 = 1.0;
  double tol = 1e-10;             // relative rank tolerance

  bool coercive() const { return delta > 0.0; }
  bool all_satisfied() const {
    return observable_ac && observable_astar_bstar && ker_ac_trivial && ker_astar_bstar_trivial &&
           coercive();
  }
};

HypothesisReport check_hypotheses(const LtiSystem& sys, double t0 = 1.0, double tol = 1e-10);

// True when the stacked matrix [top; bottom] has full column rank, with the
// rank decided by singular values above tol * sigma_max.
bool full_column_rank(const Matrix& top, const Matrix& bottom, double tol);

// Hautus test: (M, N) is observable iff [M - lambda I; N] has full column
// rank for every eigenvalue lambda of M. Rank is decided relative to
// max(|M|, |N|).
bool pbh_observable(const Matrix& m, const Matrix& n, double tol);

}  // namespace lqt
