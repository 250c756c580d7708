#include "lqt/stationary.hpp"

#include <algorithm>
#include <string>

#include "lqt/csv.hpp"
#include "lqt/parallel.hpp"

namespace lqt {

double StationaryTriple::max_residual() const {
  return std::max({residual_constraint, residual_adjoint, residual_control});
}

namespace {

void compute_residuals(const LtiSystem& sys, const Vector& z, StationaryTriple& t) {
  t.residual_constraint = (sys.a() * t.x_bar + sys.b() * t.u_bar).norm();
  t.residual_adjoint =
      (sys.a().transpose() * t.y_bar + sys.c().transpose() * (sys.c() * t.x_bar - z)).norm();
  t.residual_control = (t.u_bar + sys.b().transpose() * t.y_bar).norm();
}

// Unknown ordering: [x (n), u (m), y (n)].
Matrix stationary_kkt(const LtiSystem& sys) {
  const int n = sys.n();
  const int m = sys.m();
  const int dim = 2 * n + m;
  Matrix kkt = Matrix::Zero(dim, dim);
  kkt.block(0, 0, n, n) = sys.a();
  kkt.block(0, n, n, m) = sys.b();
  kkt.block(n, 0, n, n) = sys.ctc();
  kkt.block(n, n + m, n, n) = sys.a().transpose();
  kkt.block(2 * n, n, m, m) = Matrix::Identity(m, m);
  kkt.block(2 * n, n + m, m, n) = sys.b().transpose();
  return kkt;
}

}  // namespace

StationaryTriple solve_stationary(const LtiSystem& sys, const Vector& z,
                                  const StationaryOptions& options) {
  const int n = sys.n();
  const int m = sys.m();
  if (z.size() != n) {
    throw InputError("target dimension " + std::to_string(z.size()) + " does not match n=" +
                     std::to_string(n));
  }
  if (!z.allFinite()) throw InputError("non-finite entry in target z");

  if (options.check_hypotheses) {
    const auto report = check_hypotheses(sys, options.t0, options.hypothesis_tol);
    if (!report.ker_ac_trivial || !report.ker_astar_bstar_trivial || !report.observable_ac ||
        !report.observable_astar_bstar) {
      // Report the KKT rank alongside the failed hypotheses.
      const int dim = 2 * n + m;
      Eigen::FullPivLU<Matrix> lu(stationary_kkt(sys));
      lu.setThreshold(options.rank_tol);
      throw UniquenessError(
          "uniqueness failure: turnpike hypotheses violated (ker A ∩ ker C trivial: " +
              std::string(report.ker_ac_trivial ? "yes" : "no") + ", ker A^T ∩ ker B^T trivial: " +
              (report.ker_astar_bstar_trivial ? "yes" : "no") + "); KKT rank " +
              std::to_string(lu.rank()) + " of " + std::to_string(dim),
          static_cast<int>(lu.rank()), dim);
    }
  }

  const int dim = 2 * n + m;
  const Matrix kkt = stationary_kkt(sys);
  Vector rhs = Vector::Zero(dim);
  rhs.segment(n, n) = sys.c().transpose() * z;

  Eigen::FullPivLU<Matrix> lu(kkt);
  lu.setThreshold(options.rank_tol);
  if (lu.rank() < dim) {
    throw UniquenessError("uniqueness failure: stationary KKT matrix has rank " +
                              std::to_string(lu.rank()) + " < " + std::to_string(dim),
                          static_cast<int>(lu.rank()), dim);
  }
  Vector sol = lu.solve(rhs);
  // One step of iterative refinement.
  sol += lu.solve(rhs - kkt * sol);

  StationaryTriple t;
  t.x_bar = sol.segment(0, n);
  t.u_bar = sol.segment(n, m);
  t.y_bar = sol.segment(n + m, n);
  t.scale = std::max(1.0, rhs.norm());
  compute_residuals(sys, z, t);
  return t;
}

StationaryTriple solve_stationary_approx(const LtiSystem& sys, const Vector& z, double k,
                                         const StationaryOptions& options) {
  return solve_stationary(sys.with_control(approx_control_operator(sys, k)), z, options);
}

std::vector<StationaryStudyRow> stationary_convergence_study(const LtiSystem& sys, const Vector& z,
                                                             const std::vector<double>& ks,
                                                             const StationaryOptions& options,
                                                             int jobs) {
  if (ks.empty()) throw InputError("stationary_convergence_study: ks must be nonempty");
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (!(ks[i] > ks[i - 1])) throw InputError("stationary_convergence_study: ks must be increasing");
  }
  const auto exact = solve_stationary(sys, z, options);
  return parallel_map(ks.size(), jobs, [&](std::size_t i) {
    const auto approx = solve_stationary_approx(sys, z, ks[i], options);
    StationaryStudyRow row;
    row.k = ks[i];
    row.err_x = (approx.x_bar - exact.x_bar).norm();
    row.err_u = (approx.u_bar - exact.u_bar).norm();
    row.err_y = (approx.y_bar - exact.y_bar).norm();
    return row;
  });
}

void write_study_csv(std::ostream& os, const std::vector<StationaryStudyRow>& rows) {
  csv::write_header(os, {"k", "err_x", "err_u", "err_y"});
  for (const auto& r : rows) {
    csv::Row row;
    row << r.k << r.err_x << r.err_u << r.err_y;
    csv::write_row(os, row);
  }
}

}  // namespace lqt
