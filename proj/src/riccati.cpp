#include "lqt/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lqt/csv.hpp"
#include "lqt/linalg.hpp"

namespace lqt {

namespace {

constexpr double kDivergence = 1e12;

// Hautus test restricted to modes with Re(lambda) >= 0: returns the first
// eigenvalue of M with [M - lambda I; N] rank deficient, if any. A defective
// imaginary-axis mode only moves O(sqrt(eps)) off the axis in the Hamiltonian,
// so this catches cases the Schur spectrum check misses.
std::optional<std::complex<double>> unstable_hidden_mode(const Matrix& m, const Matrix& n) {
  using CMatrix = Eigen::MatrixXcd;
  const auto size = m.rows();
  Eigen::ComplexEigenSolver<CMatrix> es(m.cast<std::complex<double>>(), false);
  if (es.info() != Eigen::Success) throw ConvergenceError("eigenvalue computation failed");
  const double scale = std::max({linalg::norm2_bound(m), linalg::norm2_bound(n), 1e-300});
  CMatrix stacked(size + n.rows(), size);
  stacked.bottomRows(n.rows()) = n.cast<std::complex<double>>();
  for (Eigen::Index i = 0; i < size; ++i) {
    const auto lambda = es.eigenvalues()(i);
    if (lambda.real() < -1e-8 * scale) continue;
    stacked.topRows(size) = m.cast<std::complex<double>>();
    stacked.topRows(size).diagonal().array() -= lambda;
    Eigen::JacobiSVD<CMatrix> svd(stacked);
    if (!(svd.singularValues()(size - 1) > 1e-10 * scale)) return lambda;
  }
  return std::nullopt;
}

std::string mode_text(std::complex<double> z) {
  return csv::format(z.real()) + (z.imag() < 0 ? "-" : "+") + csv::format(std::abs(z.imag())) + "i";
}
// RK4 is stable on [-2.78, 0] of the real axis; keep some headroom.
constexpr double kRk4Reach = 2.5;

double frob(const Matrix& m) { return m.norm(); }

void require_symmetric_psd(const Matrix& p, int n, const char* what) {
  if (p.rows() != n || p.cols() != n) {
    throw InputError(std::string(what) + ": expected " + std::to_string(n) + "x" +
                     std::to_string(n) + " matrix");
  }
  if (!p.allFinite()) throw InputError(std::string(what) + ": non-finite entry");
  const double scale = std::max(frob(p), 1e-300);
  if (frob(p - p.transpose()) > 1e-12 * scale) {
    throw InputError(std::string(what) + ": matrix is not symmetric");
  }
  if (n > 0 && frob(p) > 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(p), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10 * scale) {
      throw InputError(std::string(what) + ": matrix is not positive semidefinite");
    }
  }
}

// Right-hand side of the Riccati flow and its companion vector equation.
class Flow {
 public:
  Flow(const LtiSystem& sys, RiccatiForm form, const Vector& c0, const Vector& c1)
      : sys_(sys), form_(form), c0_(c0), c1_(c1) {
    if (form == RiccatiForm::kValue) {
      q_ = sys.ctc();
      f_ = sys.b();
    } else {
      q_ = sys.bbt();
      f_ = sys.c().transpose();
    }
    // Dense weight when the factor is not thin.
    low_rank_ = f_.cols() < sys.n();
    if (!low_rank_) s_ = f_ * f_.transpose();
    m_norm_ = linalg::norm2_bound(sys.a());
    f_norm2_ = std::pow(linalg::norm2_bound(f_), 2);
  }

  bool has_companion() const { return c0_.size() > 0 || c1_.size() > 0; }

  // An empty v skips the companion equation.
  void eval(const Matrix& x, const Vector& v, Matrix& dx, Vector& dv) const {
    const bool companion = v.size() > 0;
    const Matrix mtx = mt(x);
    if (low_rank_) {
      const Matrix xf = x * f_;
      dx = mtx + mtx.transpose() + q_;
      dx.noalias() -= xf * xf.transpose();
      if (companion) dv = mt(v) - xf * (f_.transpose() * v);
    } else {
      const Matrix sx = s_ * x;
      dx = mtx + mtx.transpose() + q_;
      dx.noalias() -= x * sx;
      if (companion) dv = mt(v) - x * (s_ * v);
    }
    if (companion) {
      if (c0_.size() > 0) dv += c0_;
      if (c1_.size() > 0) dv.noalias() += x * c1_;
    }
  }

  // Substeps keeping h * (spectral radius of the linearization) inside the
  // RK4 stability interval.
  int substeps(double h, const Matrix& x) const {
    const double rho = 2.0 * (m_norm_ + f_norm2_ * linalg::norm2_bound(x));
    return std::max(1, static_cast<int>(std::ceil(h * rho / kRk4Reach)));
  }

 private:
  Matrix mt(const Matrix& x) const {
    return form_ == RiccatiForm::kValue ? apply_at(sys_, x) : apply_a(sys_, x);
  }

  const LtiSystem& sys_;
  RiccatiForm form_;
  Vector c0_;
  Vector c1_;
  Matrix q_;
  Matrix f_;
  Matrix s_;
  bool low_rank_ = true;
  double m_norm_ = 0.0;
  double f_norm2_ = 0.0;
};

void check_divergence(const Matrix& x, int k, int steps) {
  if (!x.allFinite() || frob(x) > kDivergence) {
    throw IntegrationError("Riccati integration diverged at step " + std::to_string(k + 1) +
                           " of " + std::to_string(steps));
  }
}

RiccatiFlow rk4_flow(const LtiSystem& sys, const Flow& flow, const Matrix& x_init,
                     const Vector& v_init, double span, int steps) {
  const int n = sys.n();
  const bool companion = flow.has_companion() || v_init.size() > 0;
  RiccatiFlow out;
  out.x.reserve(steps + 1);
  out.x.push_back(x_init);
  if (companion) {
    out.v.reserve(steps + 1);
    out.v.push_back(v_init.size() > 0 ? v_init : Vector::Zero(n));
  }

  const double h = span / steps;
  Matrix x = x_init;
  Vector v = companion ? out.v.front() : Vector();
  Matrix k1, k2, k3, k4;
  Vector l1, l2, l3, l4;
  for (int k = 0; k < steps; ++k) {
    const int sub = flow.substeps(h, x);
    out.substeps = std::max(out.substeps, sub);
    const double hs = h / sub;
    for (int j = 0; j < sub; ++j) {
      flow.eval(x, v, k1, l1);
      flow.eval(x + 0.5 * hs * k1, companion ? Vector(v + 0.5 * hs * l1) : v, k2, l2);
      flow.eval(x + 0.5 * hs * k2, companion ? Vector(v + 0.5 * hs * l2) : v, k3, l3);
      flow.eval(x + hs * k3, companion ? Vector(v + hs * l3) : v, k4, l4);
      x += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      x = linalg::symmetrize(x);
      if (companion) v += (hs / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    }
    check_divergence(x, k, steps);
    out.x.push_back(x);
    if (companion) out.v.push_back(v);
  }
  return out;
}

// phi_1, phi_2, phi_3 with phi_k(z) = sum_j z^j / (j + k)!.
void phi123(double z, double& p1, double& p2, double& p3) {
  if (std::abs(z) <= 1.0) {
    p1 = p2 = p3 = 0.0;
    double term = 1.0;  // z^j / j!
    for (int j = 0; j < 25; ++j) {
      const double a = term / (j + 1);
      const double b = a / (j + 2);
      const double c = b / (j + 3);
      p1 += a;
      p2 += b;
      p3 += c;
      term *= z / (j + 1);
    }
    return;
  }
  p1 = std::expm1(z) / z;
  p2 = (p1 - 1.0) / z;
  p3 = (p2 - 0.5) / z;
}

// Entrywise ETDRK4 coefficients for rates lambda and step h.
struct EtdCoefficients {
  Eigen::ArrayXXd e, e2, qc, f1, f2, f3;

  EtdCoefficients(const Eigen::ArrayXXd& lambda, double h) {
    const auto rows = lambda.rows();
    const auto cols = lambda.cols();
    for (auto* a : {&e, &e2, &qc, &f1, &f2, &f3}) a->resize(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double z = h * lambda(i, j);
        double p1, p2, p3, h1, h2, h3;
        phi123(z, p1, p2, p3);
        phi123(0.5 * z, h1, h2, h3);
        e(i, j) = std::exp(z);
        e2(i, j) = std::exp(0.5 * z);
        qc(i, j) = 0.5 * h * h1;
        f1(i, j) = h * (p1 - 3.0 * p2 + 4.0 * p3);
        f2(i, j) = h * (p2 - 2.0 * p3);
        f3(i, j) = h * (-p2 + 4.0 * p3);
      }
    }
  }
};

// Cox-Matthews ETDRK4 in the orthonormal eigenbasis of a symmetric A. With
// A = V D V^T the hatted variables X = V^T X V, v = V^T v satisfy
//   X' = D X + X D + N(X),  v' = D v + N_v(X, v),
// so the stiff linear part is diagonal entrywise.
RiccatiFlow etd_flow(const LtiSystem& sys, RiccatiForm form, const Matrix& x_init,
                     const Vector& v_init, const Vector& c0, const Vector& c1, double span,
                     int steps) {
  const int n = sys.n();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(sys.a()));
  if (es.info() != Eigen::Success) throw ConvergenceError("eigendecomposition of A failed");
  const Matrix& vb = es.eigenvectors();
  const Vector d = es.eigenvalues();

  const Matrix q = form == RiccatiForm::kValue ? sys.ctc() : sys.bbt();
  const Matrix f = form == RiccatiForm::kValue ? sys.b() : Matrix(sys.c().transpose());
  const Matrix qh = linalg::symmetrize(vb.transpose() * q * vb);
  const Matrix fh = vb.transpose() * f;
  const bool low_rank = f.cols() < n;
  const Matrix sh = low_rank ? Matrix() : Matrix(linalg::symmetrize(fh * fh.transpose()));
  const bool companion = c0.size() > 0 || c1.size() > 0 || v_init.size() > 0;
  const Vector c0h = c0.size() > 0 ? Vector(vb.transpose() * c0) : Vector::Zero(n);
  const Vector c1h = c1.size() > 0 ? Vector(vb.transpose() * c1) : Vector::Zero(n);

  const double h = span / steps;
  const Eigen::ArrayXXd lam_m = d.replicate(1, n).array() + d.transpose().replicate(n, 1).array();
  const EtdCoefficients cm(lam_m, h);
  const EtdCoefficients cv(d.array(), h);

  auto nonlinear = [&](const Matrix& x, const Vector& v, Matrix& nx, Vector& nv) {
    if (low_rank) {
      const Matrix xf = x * fh;
      nx = qh;
      nx.noalias() -= xf * xf.transpose();
      if (companion) nv = c0h - xf * (fh.transpose() * v) + x * c1h;
    } else {
      nx = qh;
      nx.noalias() -= x * (sh * x);
      if (companion) nv = c0h - x * (sh * v) + x * c1h;
    }
  };

  RiccatiFlow out;
  out.exponential = true;
  out.x.reserve(steps + 1);
  out.x.push_back(x_init);
  Matrix x = vb.transpose() * x_init * vb;
  Vector v;
  if (companion) {
    const Vector v0 = v_init.size() > 0 ? v_init : Vector::Zero(n);
    out.v.reserve(steps + 1);
    out.v.push_back(v0);
    v = vb.transpose() * v0;
  }
  Matrix nu, na, nb, nc;
  Vector mu, ma, mb, mc;
  for (int k = 0; k < steps; ++k) {
    nonlinear(x, v, nu, mu);
    const Matrix a = (cm.e2 * x.array() + cm.qc * nu.array()).matrix();
    Vector av;
    if (companion) av = (cv.e2 * v.array() + cv.qc * mu.array()).matrix();
    nonlinear(a, av, na, ma);
    const Matrix b = (cm.e2 * x.array() + cm.qc * na.array()).matrix();
    Vector bv;
    if (companion) bv = (cv.e2 * v.array() + cv.qc * ma.array()).matrix();
    nonlinear(b, bv, nb, mb);
    const Matrix c = (cm.e2 * a.array() + cm.qc * (2.0 * nb - nu).array()).matrix();
    Vector cvv;
    if (companion) cvv = (cv.e2 * av.array() + cv.qc * (2.0 * mb - mu).array()).matrix();
    nonlinear(c, cvv, nc, mc);
    x = (cm.e * x.array() + cm.f1 * nu.array() + 2.0 * cm.f2 * (na + nb).array() +
         cm.f3 * nc.array())
            .matrix();
    x = linalg::symmetrize(x);
    if (companion) {
      v = (cv.e * v.array() + cv.f1 * mu.array() + 2.0 * cv.f2 * (ma + mb).array() +
           cv.f3 * mc.array())
              .matrix();
    }
    check_divergence(x, k, steps);
    out.x.push_back(linalg::symmetrize(vb * x * vb.transpose()));
    if (companion) out.v.push_back(vb * v);
  }
  return out;
}

bool is_symmetric(const Matrix& a) {
  return frob(a - a.transpose()) <= 1e-14 * std::max(frob(a), 1e-300);
}

}  // namespace

RiccatiFlow integrate_riccati_flow(const LtiSystem& sys, RiccatiForm form, const Matrix& x_init,
                                   const Vector& v_init, const Vector& c0, const Vector& c1,
                                   double span, int steps, RiccatiScheme scheme) {
  const int n = sys.n();
  if (!(span > 0.0) || !std::isfinite(span)) throw InputError("Riccati flow: span must be positive");
  if (steps < 2) throw InputError("Riccati flow: steps must be at least 2");
  if (x_init.rows() != n || x_init.cols() != n) throw InputError("Riccati flow: bad initial matrix");
  for (const Vector* v : {&v_init, &c0, &c1}) {
    if (v->size() != 0 && v->size() != n) throw InputError("Riccati flow: bad vector dimension");
  }
  const Flow flow(sys, form, c0, c1);
  if (scheme == RiccatiScheme::kAuto && flow.substeps(span / steps, x_init) > 1 &&
      is_symmetric(sys.a())) {
    return etd_flow(sys, form, x_init, v_init, c0, c1, span, steps);
  }
  return rk4_flow(sys, flow, x_init, v_init, span, steps);
}

double are_residual(const LtiSystem& sys, const Matrix& p) {
  const Matrix atp = sys.a().transpose() * p;
  const Matrix pa = p * sys.a();
  const Matrix psp = p * sys.bbt() * p;
  const Matrix r = atp + pa + sys.ctc() - psp;
  const double denom = frob(atp) + frob(pa) + frob(sys.ctc()) + frob(psp);
  if (denom == 0.0) return 0.0;
  return frob(r) / denom;
}

AreSolution solve_are(const LtiSystem& sys, const AreOptions& options) {
  const int n = sys.n();
  if (const auto mode = unstable_hidden_mode(sys.a().transpose(), sys.b().transpose())) {
    throw NotStabilizableError("not stabilizable: mode " + mode_text(*mode) + " is uncontrollable");
  }
  if (const auto mode = unstable_hidden_mode(sys.a(), sys.c())) {
    throw NotStabilizableError("not detectable: mode " + mode_text(*mode) + " is unobservable");
  }
  Matrix ham(2 * n, 2 * n);
  ham << sys.a(), -sys.bbt(), -sys.ctc(), -sys.a().transpose();

  const auto schur = linalg::ordered_schur(ham);
  const double scale = std::max(1.0, linalg::norm2_bound(ham));
  if (schur.min_abs_real <= 1e-10 * scale) {
    throw NotStabilizableError(
        "not stabilizable: Hamiltonian has eigenvalues on the imaginary axis");
  }
  if (schur.stable_count != n) {
    throw NotStabilizableError("not stabilizable: stable invariant subspace has dimension " +
                               std::to_string(schur.stable_count) + ", expected " +
                               std::to_string(n));
  }
  const linalg::ComplexMatrix u1 = schur.q.topLeftCorner(n, n);
  const linalg::ComplexMatrix u2 = schur.q.bottomLeftCorner(n, n);
  Eigen::JacobiSVD<linalg::ComplexMatrix> svd(u1);
  const auto& sv = svd.singularValues();
  if (!(sv(n - 1) > 1e-12 * sv(0))) {
    throw NotStabilizableError("not stabilizable: stable subspace basis U1 is singular");
  }
  // P = U2 U1^{-1}  <=>  U1^T P^T = U2^T.
  const linalg::ComplexMatrix pt =
      u1.transpose().fullPivLu().solve(u2.transpose());
  AreSolution out;
  out.p = linalg::symmetrize(pt.transpose().real());
  out.residual = are_residual(sys, out.p);

  for (int it = 0; it < options.max_newton_steps && out.residual > 1e-15; ++it) {
    const Matrix acl = sys.a() - sys.bbt() * out.p;
    Matrix next;
    try {
      next = linalg::solve_lyapunov(acl, sys.ctc() + out.p * sys.bbt() * out.p);
    } catch (const ConvergenceError&) {
      break;
    }
    next = linalg::symmetrize(next);
    const double r = are_residual(sys, next);
    if (!(r < out.residual)) break;
    out.p = next;
    out.residual = r;
    ++out.newton_steps;
  }
  if (!(out.residual <= options.tolerance)) {
    throw ConvergenceError("ARE residual " + csv::format(out.residual) + " above tolerance " +
                           csv::format(options.tolerance));
  }
  out.closed_loop_abscissa = linalg::spectral_abscissa(sys.a() - sys.bbt() * out.p);
  return out;
}

DreSolution solve_dre(const LtiSystem& sys, double horizon, const Matrix& p0, int steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("solve_dre: T must be positive");
  if (steps < 2) throw InputError("solve_dre: steps must be at least 2");
  require_symmetric_psd(p0, sys.n(), "solve_dre: p0");

  const Vector none;
  auto flow = integrate_riccati_flow(sys, RiccatiForm::kValue, linalg::symmetrize(p0), none, none,
                                     none, horizon, steps);
  DreSolution out;
  out.p0 = p0;
  out.substeps = flow.substeps;
  out.grid.resize(steps + 1);
  out.p_samples.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    out.grid[k] = horizon * k / steps;
    // Flow index counts from t = T backwards.
    out.p_samples[k] = std::move(flow.x[steps - k]);
  }
  out.grid[steps] = horizon;
  out.p_samples[steps] = p0;
  return out;
}

ValueCheck value_function_check(const LtiSystem& sys, const AreSolution& are, const Vector& xi,
                                double horizon, double dt) {
  const int n = sys.n();
  if (xi.size() != n) throw InputError("value_function_check: xi has wrong dimension");
  if (!(horizon > 0.0) || !(dt > 0.0)) throw InputError("value_function_check: bad horizon or dt");
  const Matrix acl = sys.a() - sys.bbt() * are.p;
  const Eigen::JacobiSVD<Matrix> svd(linalg::expm(horizon * acl));
  if (svd.singularValues()(0) > 1e-6) {
    throw TruncationError("truncation horizon " + csv::format(horizon) +
                          " too short: |exp((A - BB^T P) T)| = " +
                          csv::format(svd.singularValues()(0)) + " > 1e-6");
  }
  int steps = static_cast<int>(std::ceil(horizon / dt - 1e-9));
  if (steps % 2 == 1) ++steps;
  const double h = horizon / steps;

  const Matrix gain = sys.b().transpose() * are.p;
  auto integrand = [&](const Vector& x) {
    return (sys.c() * x).squaredNorm() + (gain * x).squaredNorm();
  };
  Vector x = xi;
  double sum = integrand(x);
  for (int k = 1; k <= steps; ++k) {
    const Vector k1 = acl * x;
    const Vector k2 = acl * (x + 0.5 * h * k1);
    const Vector k3 = acl * (x + 0.5 * h * k2);
    const Vector k4 = acl * (x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double w = (k == steps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    sum += w * integrand(x);
  }
  ValueCheck out;
  out.quadratic_form = xi.dot(are.p * xi);
  out.simulated_cost = sum * h / 3.0;
  return out;
}

ClosedLoop closed_loop_generator(const LtiSystem& sys, const AreSolution& are) {
  ClosedLoop out;
  out.generator = sys.a() - sys.bbt() * are.p;
  out.lambda = -linalg::spectral_abscissa(out.generator);
  out.decays = out.lambda > 0.0;
  return out;
}

void write_dre_csv(std::ostream& os, const DreSolution& dre) {
  csv::write_header(os, {"t", "i", "j", "value"});
  for (std::size_t k = 0; k < dre.grid.size(); ++k) {
    const Matrix& p = dre.p_samples[k];
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        csv::Row row;
        row << dre.grid[k] << static_cast<long>(i) << static_cast<long>(j) << p(i, j);
        csv::write_row(os, row);
      }
    }
  }
}

}  // namespace lqt
