#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "lqt/linalg.hpp"
#include "lqt/scenarios.hpp"
#include "lqt/turnpike.hpp"

using namespace lqt;

namespace {

std::vector<double> grid(double horizon, int steps) {
  std::vector<double> g(steps + 1);
  for (int k = 0; k <= steps; ++k) g[k] = horizon * k / steps;
  return g;
}

TurnpikeOptions scalar_options() {
  const auto s = scalar_example();
  TurnpikeOptions o;
  o.x0 = s.x0;
  o.target = s.target;
  o.dt = 1e-3;
  o.jobs = 2;
  return o;
}

}  // namespace

TEST(DecayFit, ExactOnPureExponential) {
  const auto t = grid(4.0, 400);
  std::vector<double> m(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) m[k] = 2.5 * std::exp(-1.3 * t[k]);
  const auto fit = fit_decay_rate(t, m, 0.5, 3.5);
  EXPECT_NEAR(fit.lambda, 1.3, 1e-12);
  EXPECT_NEAR(fit.c, 2.5, 1e-11);
  EXPECT_EQ(fit.nodes, 301);
}

TEST(DecayFit, RejectsDegenerateInput) {
  const auto t = grid(1.0, 10);
  EXPECT_THROW(fit_decay_rate(t, std::vector<double>(11, 0.0), 0.0, 1.0), InputError);
  EXPECT_THROW(fit_decay_rate(t, std::vector<double>(11, 1.0), 0.0, 0.2), InputError);
  EXPECT_THROW(fit_decay_rate(t, std::vector<double>(5, 1.0), 0.0, 1.0), InputError);
}

TEST(ModeFit, SlowestModeOfMixedOrbit) {
  // Orbit e^{tM} v with a dominant fast mode; magnitude fits see a blend.
  Matrix m(3, 3);
  m << -0.7, 0.0, 0.0, 0.0, -0.3, 2.0, 0.0, -2.0, -0.3;
  const Vector v(Vector::Ones(3) * 1.0);
  const auto t = grid(8.0, 800);
  Matrix snaps(3, t.size());
  for (std::size_t k = 0; k < t.size(); ++k) snaps.col(k) = linalg::expm(t[k] * m) * v;
  EXPECT_NEAR(fit_mode_rate(t, snaps, 0.5, 7.5).lambda, 0.3, 1e-8);
  Matrix real_only = Matrix::Zero(1, t.size());
  for (std::size_t k = 0; k < t.size(); ++k) real_only(0, k) = 3.0 * std::exp(-0.9 * t[k]);
  EXPECT_NEAR(fit_mode_rate(t, real_only, 1.0, 6.0).lambda, 0.9, 1e-10);
  EXPECT_THROW(fit_mode_rate(t, Matrix::Zero(3, t.size()), 1.0, 6.0), InputError);
  EXPECT_THROW(fit_mode_rate(t, snaps, 1.0, 1.02), InputError);
}

TEST(Propagation, ScalarIdentityAndOrder) {
  const auto s = scalar_example();
  const auto st = solve_stationary(s.sys, s.target);
  const auto are = solve_are(s.sys);
  auto residual = [&](double dt) {
    const auto prob = make_problem(s.sys, 10.0, s.target, s.x0, Matrix::Zero(1, 1), dt);
    const auto t = solve_transcription(prob);
    return propagation_residual(h_trajectory(t, st, are), s.sys, are, t.grid);
  };
  const double r1 = residual(1e-3), r2 = residual(5e-4);
  EXPECT_LT(r1, 1e-6);
  EXPECT_NEAR(r1 / r2, 4.0, 0.3);
}

TEST(Propagation, SweepIsExactUpToIntegration) {
  const auto s = scalar_example();
  const auto st = solve_stationary(s.sys, s.target);
  const auto are = solve_are(s.sys);
  const auto prob = make_problem(s.sys, 10.0, s.target, s.x0, Matrix::Zero(1, 1), 1e-2);
  const auto t = solve_riccati_sweep(prob);
  EXPECT_LT(propagation_residual(h_trajectory(t, st, are), s.sys, are, t.grid), 1e-10);
}

TEST(Turnpike, ScalarBoundAndRates) {
  const auto s = scalar_example();
  const auto reports = verify_turnpike(s.sys, solve_stationary(s.sys, s.target), solve_are(s.sys),
                                       {5.0, 10.0, 20.0, 40.0}, scalar_options());
  ASSERT_EQ(reports.size(), 4u);
  for (const auto& r : reports) {
    EXPECT_TRUE(r.bound_satisfied) << "T=" << r.horizon << " margin " << r.bound_margin;
    EXPECT_TRUE(r.fit_valid);
    EXPECT_NEAR(r.fitted_lambda, std::sqrt(2.0), 0.02 * std::sqrt(2.0));
    EXPECT_NEAR(r.lambda_reference, std::sqrt(2.0), 1e-10);
    EXPECT_EQ(r.uniform_c, reports.front().uniform_c);
    EXPECT_GT(r.min_c, 0.0);
  }
  EXPECT_LE(reports[2].midpoint_gap_x(), 0.2 * reports[1].midpoint_gap_x());
  // Gaps start from |x0 - x_bar| = 0.5.
  EXPECT_NEAR(reports[3].gap_x.front(), 0.5, 1e-15);
  // The control window is empty at T/2.
  const auto& r = reports[1];
  EXPECT_EQ(r.gap_u_window[r.gap_u_window.size() / 2], 0.0);
  const auto total = total_gap(r);
  EXPECT_DOUBLE_EQ(total[total.size() / 2], r.gap_x[r.gap_x.size() / 2] + r.gap_y[r.gap_y.size() / 2]);
}

TEST(Turnpike, TrivialAtSteadyState) {
  const auto s = scalar_example();
  TurnpikeOptions o = scalar_options();
  o.target = Vector::Zero(1);
  o.x0 = Vector::Zero(1);
  const auto st = solve_stationary(s.sys, o.target);
  const auto reports = verify_turnpike(s.sys, st, solve_are(s.sys), {5.0, 10.0}, o);
  for (const auto& r : reports) {
    EXPECT_TRUE(r.bound_satisfied);
    EXPECT_FALSE(r.fit_valid);
    EXPECT_TRUE(std::isnan(r.fitted_lambda));
    EXPECT_EQ(r.min_c, 0.0);
  }
}

TEST(Turnpike, JobCountDoesNotChangeOutput) {
  const auto s = scalar_example();
  const auto st = solve_stationary(s.sys, s.target);
  const auto are = solve_are(s.sys);
  auto o = scalar_options();
  o.dt = 1e-2;
  auto csv = [&](int jobs) {
    o.jobs = jobs;
    std::ostringstream os;
    const auto reports = verify_turnpike(s.sys, st, are, {5.0, 10.0, 20.0}, o);
    write_report_csv(os, reports);
    write_summary_csv(os, reports);
    return os.str();
  };
  EXPECT_EQ(csv(1), csv(3));
}

TEST(Turnpike, RejectsBadInput) {
  const auto s = scalar_example();
  const auto st = solve_stationary(s.sys, s.target);
  const auto are = solve_are(s.sys);
  EXPECT_THROW(verify_turnpike(s.sys, st, are, {}, scalar_options()), InputError);
  auto o = scalar_options();
  o.x0 = Vector::Zero(2);
  EXPECT_THROW(verify_turnpike(s.sys, st, are, {5.0}, o), InputError);
}

TEST(Energy, IdentityAndQuadratureOracle) {
  const auto s = scalar_example();
  const auto st = solve_stationary(s.sys, s.target);
  const auto prob = make_problem(s.sys, 10.0, s.target, s.x0, Matrix::Zero(1, 1), 1e-3);
  const auto t = solve_transcription(prob);
  const auto e = energy_diagnostics(s.sys, t, st);
  EXPECT_LT(e.identity_residual, 1e-10);
  EXPECT_GE(e.cauchy_schwarz_margin, -1e-12);
  // Direct trapezoid of the integrand.
  double lhs = 0.0;
  for (int k = 1; k < t.nodes(); ++k) {
    auto f = [&](int j) {
      return (t.u_applied.col(j) - st.u_bar).squaredNorm() +
             (s.sys.c() * (t.x.col(j) - st.x_bar)).squaredNorm();
    };
    lhs += 0.5 * (t.grid[k] - t.grid[k - 1]) * (f(k) + f(k - 1));
  }
  EXPECT_NEAR(e.lhs, lhs, 1e-12 * lhs);
  // Boundary terms from the trajectory ends.
  const int last = t.nodes() - 1;
  const double rhs = (t.x.col(0) - st.x_bar).dot(t.y.col(0) - st.y_bar) +
                     (t.x.col(last) - st.x_bar).dot(st.y_bar);
  EXPECT_NEAR(e.identity_rhs, rhs, 1e-14);
}

TEST(YosidaDynamic, ScalarErrorsDecrease) {
  const auto s = scalar_example();
  const auto prob = make_problem(s.sys, 5.0, s.target, s.x0, Matrix::Zero(1, 1), 1e-2);
  const auto rows = yosida_dynamic_study(prob, {2.0, 8.0, 32.0, 128.0}, LqSolver::kRiccatiSweep, 2);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(rows[i].err_u_l2, rows[i - 1].err_u_l2);
    EXPECT_LT(rows[i].err_x_max, rows[i - 1].err_x_max);
  }
  EXPECT_THROW(yosida_dynamic_study(prob, {8.0, 2.0}, LqSolver::kRiccatiSweep), InputError);
}

TEST(Csv, Headers) {
  std::ostringstream a, b, c;
  write_report_csv(a, {});
  write_summary_csv(b, {});
  write_yosida_csv(c, {});
  EXPECT_EQ(a.str(), "T,t,gap_x,gap_y,gap_u_window,h_norm\n");
  EXPECT_EQ(b.str(), "T,fitted_c,fitted_lambda,lambda_reference,propagation_residual,bound_satisfied\n");
  EXPECT_EQ(c.str(), "k,err_u_l2,err_x_max,err_y_max\n");
}
