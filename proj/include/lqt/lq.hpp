#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "lqt/common.hpp"
#include "lqt/operators.hpp"

namespace lqt {

// min  int_0^T |Cx - z|^2 + |u|^2 dt + <P0 x(T), x(T)>
// s.t. x' = Ax + Bu, x(0) = x0.
struct LqProblem {
  LtiSystem sys;
  double horizon = 1.0;
  Vector target;
  Vector x0;
  Matrix p0;
  double dt = 1e-3;

  int steps() const;
  std::vector<double> grid() const;
};

// Validates T > 0, dt > 0 dividing T, dimensions, and p0 symmetric PSD.
LqProblem make_problem(const LtiSystem& sys, double horizon, const Vector& target, const Vector& x0,
                       const Matrix& p0, double dt);

enum class TrajectoryMethod { kTranscription, kRiccatiSweep, kClosedLoop };

std::string method_name(TrajectoryMethod method);

// Node values stored column-wise: x.col(k) is the state at grid[k].
struct Trajectory {
  std::vector<double> grid;
  Matrix x;  // n x (N+1)
  Matrix y;  // n x (N+1)
  Matrix u;  // m x (N+1), u = -B^T y at every node
  // Controls that drive the discrete state. They equal u except at the two
  // endpoints of a transcription, where the discrete optimum is only a
  // first-order approximation of -B^T y.
  Matrix u_applied;
  TrajectoryMethod method = TrajectoryMethod::kTranscription;

  int nodes() const { return static_cast<int>(grid.size()); }
};

struct TranscriptionOptions {
  // Cap on N * (n + m).
  long max_unknowns = 2'000'000;
};

// Implicit trapezoid dynamics and trapezoid cost, assembled as one sparse
// symmetric KKT system and solved directly. Nodal adjoints come from the
// constraint multipliers:
//   y_0 = -nu,  y_k = -(mu_{k-1} + mu_k) / 2,  y_N = P0 x_N,
// where nu belongs to x(0) = x0 and mu_k to the k-th step.
Trajectory solve_transcription(const LqProblem& prob, const TranscriptionOptions& options = {});

// Backward DRE for P_T with the feedforward r' = (P_T BB^T - A^T) r + C^T z,
// r(T) = 0, next to the forward filter equation
//   W' = AW + WA^T + BB^T - W C^T C W,  W(0) = 0,
//   q' = (A - W C^T C) q + W C^T z,     q(0) = x0,
// which parametrizes x = q - W y. Nodes solve (I + W P_T) x = q - W r, then
// y = P_T x + r and u = -B^T y.
Trajectory solve_riccati_sweep(const LqProblem& prob);

enum class LqSolver { kTranscription, kRiccatiSweep };

// Parses "transcription" or "sweep" / "riccati-sweep".
LqSolver parse_solver(const std::string& name);
std::string solver_name(LqSolver solver);

Trajectory solve_lq(const LqProblem& prob, LqSolver solver);

struct StateAdjoint {
  Matrix x;
  Matrix y;
};

// Forward RK4 for x under the piecewise-linear control u (m x (N+1)), then
// backward RK4 for y' = -A^T y - C^T (Cx - z), y(T) = P0 x(T).
StateAdjoint adjoint_from_control(const LqProblem& prob, const Matrix& u);

// Trapezoid quadrature of |Cx - z|^2 + |u|^2 plus the terminal quadratic
// form, using the applied controls.
double cost(const LqProblem& prob, const Trajectory& traj);

// Discrete cost of a control sequence under the trapezoid dynamics used by
// solve_transcription. The transcription optimum minimizes this exactly.
double discrete_cost(const LqProblem& prob, const Matrix& u);

struct DualityForward {
  Vector y0;
  Matrix f;  // n x (N+1)
  Matrix u;  // m x (N+1)
  Matrix m;  // n x n
};

struct DualityBackward {
  Vector z_t;
  Matrix g;  // n x (N+1)
};

// Integrates y' = Ay + f + Bu + My forward and z' = -A^T z - g backward
// (RK4, linear interpolation of the data) and returns
// |<y(T), z_T> - <y0, z(0)> - int <u, B^T z> + int <y, g> - int <f, z> - int <My, z>|
// with trapezoid quadrature.
double duality_residual(const LtiSystem& sys, const DualityForward& forward,
                        const DualityBackward& backward, double horizon, double dt);

// Closed-loop realization x' = (A - BB^T P) x, y = P x, u = -B^T P x.
Trajectory solve_infinite_horizon(const LtiSystem& sys, const Vector& x0, double horizon, double dt);

// Header `t,kind,index,value`, kind in {x, y, u}.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace lqt
