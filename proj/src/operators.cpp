#include "lqt/operators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lqt/linalg.hpp"

namespace lqt {

namespace {

void require_finite(const Matrix& m, const char* name) {
  if (!m.allFinite()) {
    throw InputError(std::string("non-finite entry in ") + name);
  }
}

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

LtiSystem::LtiSystem(Matrix a, Matrix b, Matrix c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  const auto n = a_.rows();
  if (n < 1 || a_.cols() != n) {
    throw InputError("dimension mismatch: A must be square and nonempty, got " + shape(a_));
  }
  if (b_.rows() != n || b_.cols() < 1) {
    throw InputError("dimension mismatch: B must be " + std::to_string(n) + "xm with m>=1, got " +
                     shape(b_));
  }
  if (c_.rows() != n || c_.cols() != n) {
    throw InputError("dimension mismatch: C must be " + std::to_string(n) + "x" +
                     std::to_string(n) + ", got " + shape(c_));
  }
  require_finite(a_, "A");
  require_finite(b_, "B");
  require_finite(c_, "C");
  bbt_ = b_ * b_.transpose();
  ctc_ = c_.transpose() * c_;
  const auto nnz = (a_.array() != 0.0).count();
  if (n >= 8 && 4 * nnz <= n * n) {
    sparse_a_ = std::make_shared<const Eigen::SparseMatrix<double>>(a_.sparseView());
  }
}

LtiSystem LtiSystem::with_control(Matrix b) const { return LtiSystem(a_, std::move(b), c_); }

LtiSystem make_system(Matrix a, Matrix b, Matrix c) {
  return LtiSystem(std::move(a), std::move(b), std::move(c));
}

Matrix apply_a(const LtiSystem& sys, const Matrix& x) {
  if (const auto* s = sys.sparse_a()) return *s * x;
  return sys.a() * x;
}

Matrix apply_at(const LtiSystem& sys, const Matrix& x) {
  if (const auto* s = sys.sparse_a()) return s->transpose() * x;
  return sys.a().transpose() * x;
}

Matrix semigroup(const LtiSystem& sys, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw InputError("semigroup time must be finite and nonnegative");
  }
  if (t == 0.0) return Matrix::Identity(sys.n(), sys.n());
  return linalg::expm(t * sys.a());
}

Matrix yosida(const LtiSystem& sys, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw InputError("Yosida parameter k must be positive");
  const double abscissa = linalg::spectral_abscissa(sys.a());
  if (k <= abscissa) {
    throw InputError("invalid Yosida parameter k=" + std::to_string(k) +
                     ": must exceed the spectral abscissa " + std::to_string(abscissa));
  }
  const auto n = sys.n();
  const Matrix shifted = k * Matrix::Identity(n, n) - sys.a();
  Eigen::PartialPivLU<Matrix> lu(shifted);
  if (!(lu.rcond() > 1e-14)) {
    throw InputError("invalid Yosida parameter k=" + std::to_string(k) + ": kI - A is singular");
  }
  return k * lu.inverse();
}

Matrix approx_control_operator(const LtiSystem& sys, double k) { return yosida(sys, k) * sys.b(); }

Matrix observability_gramian(const Matrix& m, const Matrix& n, double t0, int steps) {
  if (m.rows() != m.cols() || n.cols() != m.rows()) {
    throw InputError("observability_gramian: M must be square with as many columns as N");
  }
  if (!(t0 > 0.0) || !std::isfinite(t0)) throw InputError("observability_gramian: t0 must be positive");
  if (steps < 2) throw InputError("observability_gramian: steps must be at least 2");

  const double h = t0 / steps;
  const Matrix step = linalg::expm(h * m);
  const Matrix ntn = n.transpose() * n;
  Matrix flow = Matrix::Identity(m.rows(), m.cols());
  Matrix sum = 0.5 * ntn;
  for (int k = 1; k <= steps; ++k) {
    flow = flow * step;
    const Matrix integrand = flow.transpose() * ntn * flow;
    sum += (k == steps ? 0.5 : 1.0) * integrand;
  }
  return linalg::symmetrize(h * sum);
}

bool full_column_rank(const Matrix& top, const Matrix& bottom, double tol) {
  Matrix stacked(top.rows() + bottom.rows(), top.cols());
  stacked << top, bottom;
  Eigen::JacobiSVD<Matrix> svd(stacked);
  const auto& s = svd.singularValues();
  if (s.size() < top.cols()) return false;
  const double smax = s(0);
  if (smax == 0.0) return false;
  return s(s.size() - 1) > tol * smax;
}

bool pbh_observable(const Matrix& m, const Matrix& n, double tol) {
  using CMatrix = Eigen::MatrixXcd;
  const auto size = m.rows();
  Eigen::ComplexEigenSolver<CMatrix> es(m.cast<std::complex<double>>(), /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw ConvergenceError("eigenvalue computation failed");
  const double scale = std::max({linalg::norm2_bound(m), linalg::norm2_bound(n), 1e-300});
  CMatrix stacked(size + n.rows(), size);
  stacked.bottomRows(n.rows()) = n.cast<std::complex<double>>();
  for (Eigen::Index i = 0; i < size; ++i) {
    stacked.topRows(size) = m.cast<std::complex<double>>();
    stacked.topRows(size).diagonal().array() -= es.eigenvalues()(i);
    Eigen::JacobiSVD<CMatrix> svd(stacked);
    if (!(svd.singularValues()(size - 1) > tol * scale)) return false;
  }
  return true;
}

HypothesisReport check_hypotheses(const LtiSystem& sys, double t0, double tol) {
  if (!(t0 > 0.0)) throw InputError("check_hypotheses: t0 must be positive");
  HypothesisReport r;
  r.t0 = t0;
  r.tol = tol;

  const Matrix g_ac = observability_gramian(sys.a(), sys.c(), t0);
  const Matrix g_ab = observability_gramian(sys.a().transpose(), sys.b().transpose(), t0);
  Eigen::SelfAdjointEigenSolver<Matrix> e_ac(g_ac, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> e_ab(g_ab, Eigen::EigenvaluesOnly);
  r.obs_ac = e_ac.eigenvalues()(0);
  r.obs_astar_bstar = e_ab.eigenvalues()(0);
  r.observable_ac = pbh_observable(sys.a(), sys.c(), tol);
  r.observable_astar_bstar = pbh_observable(sys.a().transpose(), sys.b().transpose(), tol);

  r.ker_ac_trivial = full_column_rank(sys.a(), sys.c(), tol);
  r.ker_astar_bstar_trivial = full_column_rank(sys.a().transpose(), sys.b().transpose(), tol);

  Eigen::JacobiSVD<Matrix> svd_c(sys.c());
  const double smin = svd_c.singularValues()(svd_c.singularValues().size() - 1);
  r.delta = smin * smin;
  return r;
}

}  // namespace lqt
