#pragma once

#include <ostream>
#include <vector>

#include "lqt/common.hpp"
#include "lqt/operators.hpp"

namespace lqt {

// Optimal steady state of min |Cx - z|^2 + |u|^2 subject to Ax + Bu = 0,
// with its Lagrange multiplier y_bar.
struct StationaryTriple {
  Vector x_bar;
  Vector u_bar;
  Vector y_bar;
  double residual_constraint = 0.0;  // |A x + B u|
  double residual_adjoint = 0.0;     // |A^T y + C^T (C x - z)|
  double residual_control = 0.0;     // |u + B^T y|
  double scale = 1.0;                // max(1, |C^T z|), for relative residuals

  double max_residual() const;
  double relative_residual() const { return max_residual() / scale; }
};

struct StationaryOptions {
  // Run check_hypotheses first and refuse to solve when they fail.
  bool check_hypotheses = true;
  double t0 = 1.0;
  double hypothesis_tol = 1e-10;
  // Relative pivot threshold for the KKT rank decision.
  double rank_tol = 1e-12;
};

// Solves the (2n+m)-dimensional KKT system
//   A x + B u = 0,  A^T y + C^T (C x - z) = 0,  u + B^T y = 0
// by a dense direct solve. Throws UniquenessError when the KKT matrix is
// rank deficient (or the hypotheses fail and are not bypassed).
StationaryTriple solve_stationary(const LtiSystem& sys, const Vector& z,
                                  const StationaryOptions& options = {});

// Same problem with B replaced by B_k = J_k B.
StationaryTriple solve_stationary_approx(const LtiSystem& sys, const Vector& z, double k,
                                         const StationaryOptions& options = {});

struct StationaryStudyRow {
  double k = 0.0;
  double err_x = 0.0;
  double err_u = 0.0;
  double err_y = 0.0;
};

// Errors of the Yosida-approximated triples against the exact triple, one
// row per k (ks must be nonempty and strictly increasing). Distinct k values
// are solved on up to `jobs` threads; rows keep the order of ks.
std::vector<StationaryStudyRow> stationary_convergence_study(const LtiSystem& sys, const Vector& z,
                                                             const std::vector<double>& ks,
                                                             const StationaryOptions& options = {},
                                                             int jobs = 1);

// Header `k,err_x,err_u,err_y`.
void write_study_csv(std::ostream& os, const std::vector<StationaryStudyRow>& rows);

}  // namespace lqt
