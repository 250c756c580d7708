#pragma once

#include <ostream>
#include <vector>

#include "lqt/common.hpp"
#include "lqt/operators.hpp"

namespace lqt {

// Stabilizing solution of A^T P + P A + C^T C - P B B^T P = 0.
struct AreSolution {
  Matrix p;
  double residual = 0.0;              // relative Frobenius residual
  double closed_loop_abscissa = 0.0;  // max Re eig(A - B B^T P)
  int newton_steps = 0;               // accepted Newton refinement steps
};

struct AreOptions {
  int max_newton_steps = 5;
  double tolerance = 1e-10;
};

// Hamiltonian-Schur method: the stable invariant subspace [U1; U2] of
// [[A, -BB^T], [-C^TC, -A^T]] gives P = U2 U1^{-1}, then up to
// `max_newton_steps` Kleinman steps polish it.
//
// Throws NotStabilizableError when there is no n-dimensional stable
// invariant subspace (or U1 is singular), ConvergenceError when the residual
// stays above tolerance.
AreSolution solve_are(const LtiSystem& sys, const AreOptions& options = {});

// Relative residual |A^T P + P A + C^T C - P B B^T P|_F divided by the sum of
// the Frobenius norms of the four terms.
double are_residual(const LtiSystem& sys, const Matrix& p);

struct DreSolution {
  std::vector<double> grid;       // uniform on [0, T]
  std::vector<Matrix> p_samples;  // P_T(t_k)
  Matrix p0;                      // terminal value, equal to the last sample
  int substeps = 1;               // RK4 substeps per grid interval used
};

// Backward RK4 on P' + A^T P + P A + C^T C - P B B^T P = 0, P(T) = p0, over
// `steps` uniform intervals, symmetrizing after every step. Each interval is
// split into enough substeps to keep RK4 inside its stability region, so stiff
// semi-discretized PDE systems integrate at the requested output grid.
// Throws IntegrationError when |P| exceeds 1e12.
DreSolution solve_dre(const LtiSystem& sys, double horizon, const Matrix& p0, int steps);

// Closed-loop quadratic value <P xi, xi> next to the simulated cost of the
// feedback u = -B^T P x over [0, horizon] (RK4 + composite Simpson).
struct ValueCheck {
  double quadratic_form = 0.0;
  double simulated_cost = 0.0;
};

// Throws TruncationError when |e^{(A - BB^T P) horizon}| > 1e-6.
ValueCheck value_function_check(const LtiSystem& sys, const AreSolution& are, const Vector& xi,
                                double horizon, double dt);

struct ClosedLoop {
  Matrix generator;     // A - B B^T P
  double lambda = 0.0;  // -(spectral abscissa of the generator)
  bool decays = false;  // lambda > 0; false is a hypothesis-violation warning
};

ClosedLoop closed_loop_generator(const LtiSystem& sys, const AreSolution& are);

// Header `t,i,j,value`, one row per matrix entry per grid node.
void write_dre_csv(std::ostream& os, const DreSolution& dre);

// Matrix Riccati flow in its stable integration direction s:
//   X' = M^T X + X M + Q - X F F^T X,
//   v' = M^T v - X F F^T v + c0 + X c1.
// The value form uses M = A, Q = C^T C, F = B (s = T - t); the filter form
// uses M = A^T, Q = B B^T, F = C^T (s = t). Samples are returned at the
// `steps + 1` uniform nodes s_k = k * span / steps.
struct RiccatiFlow {
  std::vector<Matrix> x;
  std::vector<Vector> v;
  int substeps = 1;           // max RK4 substeps per interval (1 for ETDRK4)
  bool exponential = false;   // ETDRK4 was used
};

enum class RiccatiForm { kValue, kFilter };

// kRk4: classical RK4 with stability substepping.
// kAuto: when A is symmetric and RK4 would need substeps, exponential RK4
// (Cox-Matthews ETDRK4) in the eigenbasis of A, where the Lyapunov part
// M^T X + X M acts entrywise; otherwise kRk4.
enum class RiccatiScheme { kRk4, kAuto };

RiccatiFlow integrate_riccati_flow(const LtiSystem& sys, RiccatiForm form, const Matrix& x_init,
                                   const Vector& v_init, const Vector& c0, const Vector& c1,
                                   double span, int steps,
                                   RiccatiScheme scheme = RiccatiScheme::kRk4);

}  // namespace lqt
