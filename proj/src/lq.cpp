#include "lqt/lq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "lqt/csv.hpp"
#include "lqt/linalg.hpp"
#include "lqt/riccati.hpp"

namespace lqt {

namespace {

constexpr double kRk4Reach = 2.5;

int checked_steps(double horizon, double dt, const char* who) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InputError(std::string(who) + ": horizon must be positive, got " + csv::format(horizon));
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InputError(std::string(who) + ": dt must be positive, got " + csv::format(dt));
  }
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw InputError(std::string(who) + ": dt=" + csv::format(dt) + " does not divide T=" +
                     csv::format(horizon));
  }
  return static_cast<int>(rounded);
}

int rk4_substeps(double h, double rho) {
  return std::max(1, static_cast<int>(std::ceil(h * rho / kRk4Reach)));
}

std::vector<double> uniform_grid(double horizon, int steps) {
  std::vector<double> g(steps + 1);
  for (int k = 0; k <= steps; ++k) g[k] = horizon * k / steps;
  g[steps] = horizon;
  return g;
}

std::vector<double> trapezoid_weights(int steps, double h) {
  std::vector<double> w(steps + 1, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

// Linear interpolation of column data at fraction theta of interval k.
Vector lerp(const Matrix& data, int k, double theta) {
  if (theta == 0.0) return data.col(k);
  return (1.0 - theta) * data.col(k) + theta * data.col(k + 1);
}

void require_columns(const Matrix& m, Eigen::Index rows, int nodes, const char* what) {
  if (m.rows() != rows || m.cols() != nodes) {
    throw InputError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(nodes) + " samples, got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite sample");
}

}  // namespace

int LqProblem::steps() const { return checked_steps(horizon, dt, "LqProblem"); }

std::vector<double> LqProblem::grid() const { return uniform_grid(horizon, steps()); }

LqProblem make_problem(const LtiSystem& sys, double horizon, const Vector& target, const Vector& x0,
                       const Matrix& p0, double dt) {
  checked_steps(horizon, dt, "make_problem");
  const int n = sys.n();
  if (target.size() != n) throw InputError("make_problem: target z has wrong dimension");
  if (x0.size() != n) throw InputError("make_problem: x0 has wrong dimension");
  if (!target.allFinite() || !x0.allFinite()) throw InputError("make_problem: non-finite z or x0");
  if (p0.rows() != n || p0.cols() != n || !p0.allFinite()) {
    throw InputError("make_problem: p0 must be a finite " + std::to_string(n) + "x" +
                     std::to_string(n) + " matrix");
  }
  const double scale = std::max(p0.norm(), 1e-300);
  if ((p0 - p0.transpose()).norm() > 1e-12 * scale) throw InputError("make_problem: p0 not symmetric");
  if (p0.norm() > 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(p0), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10 * scale) throw InputError("make_problem: p0 not PSD");
  }
  return LqProblem{sys, horizon, target, x0, p0, dt};
}

std::string method_name(TrajectoryMethod method) {
  switch (method) {
    case TrajectoryMethod::kTranscription:
      return "transcription";
    case TrajectoryMethod::kRiccatiSweep:
      return "riccati-sweep";
    case TrajectoryMethod::kClosedLoop:
      return "closed-loop";
  }
  return "unknown";
}

Trajectory solve_transcription(const LqProblem& prob, const TranscriptionOptions& options) {
  const LtiSystem& sys = prob.sys;
  const int n = sys.n();
  const int m = sys.m();
  const int steps = prob.steps();
  if (static_cast<long>(steps) * (n + m) > options.max_unknowns) {
    throw InputError("transcription too large: N*(n+m) = " +
                     std::to_string(static_cast<long>(steps) * (n + m)) + " exceeds cap " +
                     std::to_string(options.max_unknowns) + "; use the Riccati sweep");
  }
  const double h = prob.horizon / steps;
  const auto w = trapezoid_weights(steps, h);

  // Per node: [x_k, u_k, lambda_k]. lambda_0 enforces x_0 = x0, lambda_{k+1}
  // enforces the trapezoid step from k to k+1.
  const int block = 2 * n + m;
  const long dim = static_cast<long>(steps + 1) * block;
  auto xo = [&](int k) { return static_cast<long>(k) * block; };
  auto uo = [&](int k) { return static_cast<long>(k) * block + n; };
  auto lo = [&](int k) { return static_cast<long>(k) * block + n + m; };

  const Matrix ctc = sys.ctc();
  const Matrix ip = Matrix::Identity(n, n) - 0.5 * h * sys.a();
  const Matrix im = -(Matrix::Identity(n, n) + 0.5 * h * sys.a());
  const Matrix hb = -0.5 * h * sys.b();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(steps + 1) *
               (ctc.size() + m + 2 * (2 * ip.size() + 2 * hb.size())));
  auto add_block = [&](long r0, long c0, const Matrix& blk, double scale, bool mirror) {
    for (Eigen::Index j = 0; j < blk.cols(); ++j) {
      for (Eigen::Index i = 0; i < blk.rows(); ++i) {
        const double v = scale * blk(i, j);
        if (v == 0.0) continue;
        trip.emplace_back(r0 + i, c0 + j, v);
        if (mirror) trip.emplace_back(c0 + j, r0 + i, v);
      }
    }
  };

  Vector rhs = Vector::Zero(dim);
  const Vector ctz = sys.c().transpose() * prob.target;
  for (int k = 0; k <= steps; ++k) {
    add_block(xo(k), xo(k), ctc, w[k], false);
    for (int i = 0; i < m; ++i) trip.emplace_back(uo(k) + i, uo(k) + i, w[k]);
    rhs.segment(xo(k), n) = w[k] * ctz;
  }
  add_block(xo(steps), xo(steps), prob.p0, 1.0, false);
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(lo(0) + i, xo(0) + i, 1.0);
    trip.emplace_back(xo(0) + i, lo(0) + i, 1.0);
  }
  rhs.segment(lo(0), n) = prob.x0;
  for (int k = 0; k < steps; ++k) {
    const long row = lo(k + 1);
    add_block(row, xo(k + 1), ip, 1.0, true);
    add_block(row, uo(k + 1), hb, 1.0, true);
    add_block(row, xo(k), im, 1.0, true);
    add_block(row, uo(k), hb, 1.0, true);
  }

  Eigen::SparseMatrix<double> kkt(dim, dim);
  kkt.setFromTriplets(trip.begin(), trip.end());
  kkt.makeCompressed();
  trip.clear();
  trip.shrink_to_fit();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(kkt);
  if (lu.info() != Eigen::Success) {
    throw ConvergenceError("transcription KKT factorization failed: " + lu.lastErrorMessage());
  }
  const Vector sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite()) {
    throw ConvergenceError("transcription KKT solve failed");
  }

  Trajectory t;
  t.method = TrajectoryMethod::kTranscription;
  t.grid = uniform_grid(prob.horizon, steps);
  t.x.resize(n, steps + 1);
  t.y.resize(n, steps + 1);
  t.u_applied.resize(m, steps + 1);
  for (int k = 0; k <= steps; ++k) {
    t.x.col(k) = sol.segment(xo(k), n);
    t.u_applied.col(k) = sol.segment(uo(k), m);
  }
  t.y.col(0) = -sol.segment(lo(0), n);
  for (int k = 1; k < steps; ++k) {
    t.y.col(k) = -0.5 * (sol.segment(lo(k), n) + sol.segment(lo(k + 1), n));
  }
  t.y.col(steps) = prob.p0 * t.x.col(steps);
  t.u = t.u_applied;
  t.u.col(0) = -sys.b().transpose() * t.y.col(0);
  t.u.col(steps) = -sys.b().transpose() * t.y.col(steps);
  return t;
}

Trajectory solve_riccati_sweep(const LqProblem& prob) {
  const LtiSystem& sys = prob.sys;
  const int n = sys.n();
  const int steps = prob.steps();
  const Vector ctz = sys.c().transpose() * prob.target;
  const Vector none;

  const auto value = integrate_riccati_flow(sys, RiccatiForm::kValue, linalg::symmetrize(prob.p0),
                                            Vector::Zero(n), -ctz, none, prob.horizon, steps,
                                            RiccatiScheme::kAuto);
  const auto filter = integrate_riccati_flow(sys, RiccatiForm::kFilter, Matrix::Zero(n, n), prob.x0,
                                             none, ctz, prob.horizon, steps, RiccatiScheme::kAuto);

  Trajectory t;
  t.method = TrajectoryMethod::kRiccatiSweep;
  t.grid = uniform_grid(prob.horizon, steps);
  t.x.resize(n, steps + 1);
  t.y.resize(n, steps + 1);
  const Matrix id = Matrix::Identity(n, n);
  for (int k = 0; k <= steps; ++k) {
    const Matrix& p = k == steps ? prob.p0 : value.x[steps - k];
    const Vector& r = value.v[steps - k];
    const Matrix& wk = filter.x[k];
    const Vector& q = filter.v[k];
    Vector x = k == 0 ? prob.x0 : Vector(Eigen::PartialPivLU<Matrix>(id + wk * p).solve(q - wk * r));
    t.y.col(k) = p * x + r;
    t.x.col(k) = std::move(x);
  }
  t.u = -sys.b().transpose() * t.y;
  t.u_applied = t.u;
  return t;
}

LqSolver parse_solver(const std::string& name) {
  if (name == "transcription") return LqSolver::kTranscription;
  if (name == "sweep" || name == "riccati-sweep") return LqSolver::kRiccatiSweep;
  throw InputError("unknown solver '" + name + "' (valid: transcription, sweep)");
}

std::string solver_name(LqSolver solver) {
  return solver == LqSolver::kTranscription ? "transcription" : "sweep";
}

Trajectory solve_lq(const LqProblem& prob, LqSolver solver) {
  return solver == LqSolver::kTranscription ? solve_transcription(prob) : solve_riccati_sweep(prob);
}

StateAdjoint adjoint_from_control(const LqProblem& prob, const Matrix& u) {
  const LtiSystem& sys = prob.sys;
  const int n = sys.n();
  const int steps = prob.steps();
  require_columns(u, sys.m(), steps + 1, "adjoint_from_control: u");
  const double h = prob.horizon / steps;
  const int sub = rk4_substeps(h, linalg::norm2_bound(sys.a()));
  const double hs = h / sub;
  const int fine = steps * sub;

  // Forward state on the fine grid.
  auto control_at = [&](int f, double frac) {
    const int k = std::min(f / sub, steps - 1);
    const double theta = (f - k * sub + frac) / sub;
    return lerp(u, k, theta);
  };
  auto xdot = [&](const Vector& x, const Vector& uu) -> Vector {
    return apply_a(sys, x) + sys.b() * uu;
  };
  Matrix xf(n, fine + 1);
  xf.col(0) = prob.x0;
  for (int f = 0; f < fine; ++f) {
    const Vector x = xf.col(f);
    const Vector u0 = control_at(f, 0.0);
    const Vector um = control_at(f, 0.5);
    const Vector u1 = control_at(f, 1.0);
    const Vector k1 = xdot(x, u0);
    const Vector k2 = xdot(x + 0.5 * hs * k1, um);
    const Vector k3 = xdot(x + 0.5 * hs * k2, um);
    const Vector k4 = xdot(x + hs * k3, u1);
    xf.col(f + 1) = x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // Backward adjoint; midpoint states from cubic Hermite interpolation.
  const Matrix& c = sys.c();
  const Vector ctz = c.transpose() * prob.target;
  auto ydot = [&](const Vector& y, const Vector& x) -> Vector {
    return -apply_at(sys, y) - c.transpose() * (c * x) + ctz;
  };
  Matrix yf(n, fine + 1);
  yf.col(fine) = prob.p0 * xf.col(fine);
  Vector d1 = xdot(xf.col(fine), control_at(fine - 1, 1.0));
  for (int f = fine; f > 0; --f) {
    const Vector x1 = xf.col(f);
    const Vector x0 = xf.col(f - 1);
    const Vector d0 = xdot(x0, control_at(f - 1, 0.0));
    const Vector xm = 0.5 * (x0 + x1) + (hs / 8.0) * (d0 - d1);
    const Vector y = yf.col(f);
    // Integrating backward: step -hs.
    const Vector k1 = ydot(y, x1);
    const Vector k2 = ydot(y - 0.5 * hs * k1, xm);
    const Vector k3 = ydot(y - 0.5 * hs * k2, xm);
    const Vector k4 = ydot(y - hs * k3, x0);
    yf.col(f - 1) = y - (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    d1 = d0;
  }

  StateAdjoint out;
  out.x.resize(n, steps + 1);
  out.y.resize(n, steps + 1);
  for (int k = 0; k <= steps; ++k) {
    out.x.col(k) = xf.col(k * sub);
    out.y.col(k) = yf.col(k * sub);
  }
  return out;
}

double cost(const LqProblem& prob, const Trajectory& traj) {
  const int steps = prob.steps();
  const LtiSystem& sys = prob.sys;
  if (traj.nodes() != steps + 1) {
    throw InputError("cost: trajectory has " + std::to_string(traj.nodes()) +
                     " nodes, problem grid has " + std::to_string(steps + 1));
  }
  require_columns(traj.x, sys.n(), steps + 1, "cost: x");
  require_columns(traj.u_applied, sys.m(), steps + 1, "cost: u");
  const auto w = trapezoid_weights(steps, prob.horizon / steps);
  double sum = 0.0;
  for (int k = 0; k <= steps; ++k) {
    sum += w[k] * ((sys.c() * traj.x.col(k) - prob.target).squaredNorm() +
                   traj.u_applied.col(k).squaredNorm());
  }
  const Vector xt = traj.x.col(steps);
  return sum + xt.dot(prob.p0 * xt);
}

double discrete_cost(const LqProblem& prob, const Matrix& u) {
  const LtiSystem& sys = prob.sys;
  const int n = sys.n();
  const int steps = prob.steps();
  require_columns(u, sys.m(), steps + 1, "discrete_cost: u");
  const double h = prob.horizon / steps;
  const auto w = trapezoid_weights(steps, h);
  const Eigen::PartialPivLU<Matrix> lhs(Matrix::Identity(n, n) - 0.5 * h * sys.a());
  const Matrix fwd = Matrix::Identity(n, n) + 0.5 * h * sys.a();
  Vector x = prob.x0;
  double sum = 0.0;
  for (int k = 0; k <= steps; ++k) {
    sum += w[k] * ((sys.c() * x - prob.target).squaredNorm() + u.col(k).squaredNorm());
    if (k < steps) x = lhs.solve(fwd * x + 0.5 * h * sys.b() * (u.col(k) + u.col(k + 1)));
  }
  return sum + x.dot(prob.p0 * x);
}

double duality_residual(const LtiSystem& sys, const DualityForward& forward,
                        const DualityBackward& backward, double horizon, double dt) {
  const int n = sys.n();
  const int steps = checked_steps(horizon, dt, "duality_residual");
  const int nodes = steps + 1;
  if (forward.y0.size() != n || backward.z_t.size() != n) {
    throw InputError("duality_residual: y0 and z_T must have dimension " + std::to_string(n));
  }
  require_columns(forward.f, n, nodes, "duality_residual: f");
  require_columns(forward.u, sys.m(), nodes, "duality_residual: u");
  require_columns(backward.g, n, nodes, "duality_residual: g");
  if (forward.m.rows() != n || forward.m.cols() != n) {
    throw InputError("duality_residual: M must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  const double h = horizon / steps;
  const Matrix am = sys.a() + forward.m;
  const int sub = rk4_substeps(h, std::max(linalg::norm2_bound(am), linalg::norm2_bound(sys.a())));
  const double hs = h / sub;
  const Matrix bu = sys.b() * forward.u;
  const Matrix src = forward.f + bu;

  Matrix y(n, nodes);
  y.col(0) = forward.y0;
  for (int k = 0; k < steps; ++k) {
    Vector v = y.col(k);
    for (int j = 0; j < sub; ++j) {
      const double a = static_cast<double>(j) / sub;
      const double b = (j + 0.5) / sub;
      const double c = (j + 1.0) / sub;
      const Vector k1 = am * v + lerp(src, k, a);
      const Vector k2 = am * (v + 0.5 * hs * k1) + lerp(src, k, b);
      const Vector k3 = am * (v + 0.5 * hs * k2) + lerp(src, k, b);
      const Vector k4 = am * (v + hs * k3) + lerp(src, k, c);
      v += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y.col(k + 1) = v;
  }

  const Matrix at = sys.a().transpose();
  Matrix z(n, nodes);
  z.col(steps) = backward.z_t;
  for (int k = steps; k > 0; --k) {
    Vector v = z.col(k);
    for (int j = 0; j < sub; ++j) {
      // Fractions of interval k-1, walking from its right end.
      const double a = 1.0 - static_cast<double>(j) / sub;
      const double b = 1.0 - (j + 0.5) / sub;
      const double c = 1.0 - (j + 1.0) / sub;
      // z' = -A^T z - g, stepped with -hs.
      const Vector k1 = -(at * v) - lerp(backward.g, k - 1, a);
      const Vector k2 = -(at * (v - 0.5 * hs * k1)) - lerp(backward.g, k - 1, b);
      const Vector k3 = -(at * (v - 0.5 * hs * k2)) - lerp(backward.g, k - 1, b);
      const Vector k4 = -(at * (v - hs * k3)) - lerp(backward.g, k - 1, c);
      v -= (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    z.col(k - 1) = v;
  }

  const auto w = trapezoid_weights(steps, h);
  const Matrix btz = sys.b().transpose() * z;
  const Matrix my = forward.m * y;
  double integral = 0.0;
  for (int k = 0; k < nodes; ++k) {
    integral += w[k] * (forward.u.col(k).dot(btz.col(k)) - y.col(k).dot(backward.g.col(k)) +
                        forward.f.col(k).dot(z.col(k)) + my.col(k).dot(z.col(k)));
  }
  return std::abs(y.col(steps).dot(backward.z_t) - forward.y0.dot(z.col(0)) - integral);
}

Trajectory solve_infinite_horizon(const LtiSystem& sys, const Vector& x0, double horizon,
                                  double dt) {
  const int n = sys.n();
  if (x0.size() != n) throw InputError("solve_infinite_horizon: x0 has wrong dimension");
  const int steps = checked_steps(horizon, dt, "solve_infinite_horizon");
  const AreSolution are = solve_are(sys);
  const Matrix acl = sys.a() - sys.bbt() * are.p;
  const double h = horizon / steps;
  const int sub = rk4_substeps(h, linalg::norm2_bound(acl));
  const double hs = h / sub;

  Trajectory t;
  t.method = TrajectoryMethod::kClosedLoop;
  t.grid = uniform_grid(horizon, steps);
  t.x.resize(n, steps + 1);
  t.x.col(0) = x0;
  Vector x = x0;
  for (int k = 0; k < steps; ++k) {
    for (int j = 0; j < sub; ++j) {
      const Vector k1 = acl * x;
      const Vector k2 = acl * (x + 0.5 * hs * k1);
      const Vector k3 = acl * (x + 0.5 * hs * k2);
      const Vector k4 = acl * (x + hs * k3);
      x += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    t.x.col(k + 1) = x;
  }
  t.y = are.p * t.x;
  t.u = -sys.b().transpose() * t.y;
  t.u_applied = t.u;
  return t;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  csv::write_header(os, {"t", "kind", "index", "value"});
  const std::pair<const char*, const Matrix*> parts[] = {{"x", &traj.x}, {"y", &traj.y}, {"u", &traj.u}};
  for (int k = 0; k < traj.nodes(); ++k) {
    for (const auto& [kind, mat] : parts) {
      for (Eigen::Index i = 0; i < mat->rows(); ++i) {
        csv::Row row;
        row << traj.grid[k] << std::string_view(kind) << static_cast<long>(i) << (*mat)(i, k);
        csv::write_row(os, row);
      }
    }
  }
}

}  // namespace lqt
