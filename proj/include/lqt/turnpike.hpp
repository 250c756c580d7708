#pragma once

#include <ostream>
#include <vector>

#include "lqt/common.hpp"
#include "lqt/lq.hpp"
#include "lqt/riccati.hpp"
#include "lqt/stationary.hpp"

namespace lqt {

// h(t) = y(t) - y_bar - P (x(t) - x_bar), column per node.
Matrix h_trajectory(const Trajectory& traj, const StationaryTriple& stat, const AreSolution& are);

// max_k |g(t_k) - e^{t_k (A - BB^T P)^T} g(0)| with g(t) = h(T - t), on a
// uniform grid.
double propagation_residual(const Matrix& h, const LtiSystem& sys, const AreSolution& are,
                            const std::vector<double>& grid);

struct DecayFit {
  double c = 0.0;
  double lambda = 0.0;
  int nodes = 0;
};

// Least-squares fit of log(max(m, 1e-300)) = log c - lambda t over the nodes
// with window_lo <= t <= window_hi. Needs at least 5 nodes in the window and
// a nonzero magnitude somewhere in it.
DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& magnitude,
                        double window_lo, double window_hi);

// Rate of the slowest mode in vector snapshots (columns) inside the window:
// fits the linear recurrence s_{k+1} = K s_k by rank-truncated least squares
// (singular values below rank_tol * sigma_max dropped) and returns
// min -log|mu| / tau over the eigenvalues mu of K, tau being the snapshot
// spacing. Needs at least 5 snapshots and a nonzero one.
DecayFit fit_mode_rate(const std::vector<double>& t, const Matrix& snapshots, double window_lo,
                       double window_hi, double rank_tol = 1e-8);

struct TurnpikeOptions {
  Vector x0;
  Vector target;
  double dt = 1e-3;
  LqSolver solver = LqSolver::kTranscription;
  int jobs = 1;
  // Gaps below abs_tol * (1 + |x_bar| + |u_bar| + |y_bar|) count as solver
  // noise in the minimal-constant computation.
  double abs_tol = 1e-6;
  // Declared propagation tolerance.
  double propagation_tol = 1e-4;
};

struct TurnpikeReport {
  double horizon = 0.0;
  std::vector<double> grid;
  std::vector<double> gap_x;
  std::vector<double> gap_y;
  std::vector<double> gap_u_window;  // L2 norm of u - u_bar over I_t
  std::vector<double> h_norm;
  double fitted_c = 0.0;  // amplitude of the initial-layer fit
  double fitted_lambda = 0.0;     // equals lambda_terminal
  double lambda_initial = 0.0;   // log-linear rate of the initial-layer gap
  double lambda_terminal = 0.0;  // slowest mode of the terminal-layer h snapshots
  bool fit_valid = false;        // false when the layers sit at the noise floor
  double lambda_reference = 0.0;
  double propagation_residual = 0.0;
  double min_c = 0.0;      // smallest c with the bound holding node-wise at this T
  double uniform_c = 0.0;  // max of min_c over the horizon list
  double bound_margin = 0.0;
  bool bound_satisfied = false;

  double midpoint_gap_x() const { return gap_x[gap_x.size() / 2]; }
};

// Total gap |x - x_bar| + |y - y_bar| + |u - u_bar|_{L2(I_t)} per node.
std::vector<double> total_gap(const TurnpikeReport& r);

// For each horizon: solve with p0 = 0, measure the gaps, fit rates (see
// TurnpikeReport) on the layer windows [0.1, 0.9] * min(T/2, 5/lambda_ref), and find the minimal c in
//   gap(t) <= c (e^{-lambda t} + e^{-lambda (T - t)}) (|x0 - x_bar| + |y_bar|)
// with lambda = lambda_ref. The shared constant is the largest per-horizon c;
// bound_satisfied requires the bound with the shared constant at every node
// and the per-horizon constants to stay within a factor 2 of each other.
std::vector<TurnpikeReport> verify_turnpike(const LtiSystem& sys, const StationaryTriple& stat,
                                            const AreSolution& are,
                                            const std::vector<double>& horizons,
                                            const TurnpikeOptions& options);

struct EnergyDiagnostics {
  double lhs = 0.0;                // int |u - u_bar|^2 + |C (x - x_bar)|^2
  double identity_rhs = 0.0;       // <x0 - x_bar, y(0) - y_bar> + <x(T) - x_bar, y_bar>
  double cauchy_schwarz_rhs = 0.0; // |x0 - x_bar||y(0) - y_bar| + |x(T) - x_bar||y_bar|
  double identity_residual = 0.0;
  double cauchy_schwarz_margin = 0.0;  // rhs - lhs
};

// Trapezoid quadrature on the trajectory grid with the applied controls.
// The trajectory must come from a problem with p0 = 0.
EnergyDiagnostics energy_diagnostics(const LtiSystem& sys, const Trajectory& traj,
                                     const StationaryTriple& stat);

struct YosidaDynamicRow {
  double k = 0.0;
  double err_u_l2 = 0.0;
  double err_x_max = 0.0;
  double err_y_max = 0.0;
};

// Solves with B replaced by B_k = k (kI - A)^{-1} B for each k and compares
// against the exact-B solution. ks must be nonempty and increasing.
std::vector<YosidaDynamicRow> yosida_dynamic_study(const LqProblem& prob,
                                                   const std::vector<double>& ks, LqSolver solver,
                                                   int jobs = 1);

// `T,t,gap_x,gap_y,gap_u_window,h_norm`
void write_report_csv(std::ostream& os, const std::vector<TurnpikeReport>& reports);
// `T,fitted_c,fitted_lambda,lambda_reference,propagation_residual,bound_satisfied`
void write_summary_csv(std::ostream& os, const std::vector<TurnpikeReport>& reports);
// `k,err_u_l2,err_x_max,err_y_max`
void write_yosida_csv(std::ostream& os, const std::vector<YosidaDynamicRow>& rows);

}  // namespace lqt
