#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "lqt/linalg.hpp"
#include "lqt/operators.hpp"
#include "lqt/scenarios.hpp"

using namespace lqt;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// Truncated power series; fine for |tA| of order one.
Matrix expm_series(const Matrix& a) {
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k < 80; ++k) {
    term = term * a / k;
    sum += term;
  }
  return sum;
}

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m(i) = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST(LtiSystem, RejectsBadDimensions) {
  EXPECT_THROW(make_system(Matrix::Zero(2, 3), Matrix::Zero(2, 1), Matrix::Identity(2, 2)), InputError);
  EXPECT_THROW(make_system(Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Identity(2, 2)), InputError);
  EXPECT_THROW(make_system(Matrix::Zero(2, 2), Matrix::Zero(2, 1), Matrix::Identity(3, 2)), InputError);
}

TEST(LtiSystem, RejectsNonFinite) {
  Matrix a = -Matrix::Identity(2, 2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(make_system(a, Matrix::Ones(2, 1), Matrix::Identity(2, 2)), InputError);
}

TEST(LtiSystem, CachesGramFactors) {
  const Matrix b = random_matrix(3, 2, 1);
  const Matrix c = random_matrix(3, 3, 2);
  const auto sys = make_system(-Matrix::Identity(3, 3), b, c);
  EXPECT_TRUE(sys.bbt().isApprox(b * b.transpose()));
  EXPECT_TRUE(sys.ctc().isApprox(c.transpose() * c));
  EXPECT_EQ(sys.n(), 3);
  EXPECT_EQ(sys.m(), 2);
}

TEST(LtiSystem, SparseCopyOnlyForSparseA) {
  EXPECT_NE(heat_1d(20).sys.sparse_a(), nullptr);
  EXPECT_EQ(make_system(random_matrix(4, 4, 3), Matrix::Ones(4, 1), Matrix::Identity(4, 4)).sparse_a(),
            nullptr);
  const auto heat = heat_1d(20).sys;
  const Matrix x = random_matrix(20, 3, 4);
  EXPECT_LT((apply_a(heat, x) - heat.a() * x).norm(), 1e-9);
  EXPECT_LT((apply_at(heat, x) - heat.a().transpose() * x).norm(), 1e-9);
}

TEST(Semigroup, ScalarClosedForm) {
  const auto sys = make_system(scalar(-1.0), scalar(1.0), scalar(1.0));
  for (double t : {0.0, 0.3, 1.0, 5.0}) {
    EXPECT_NEAR(semigroup(sys, t)(0, 0), std::exp(-t), 1e-14 * std::max(1.0, std::exp(-t)));
  }
}

TEST(Semigroup, MatchesPowerSeries) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix a = random_matrix(4, 4, seed);
    const auto sys = make_system(a, Matrix::Ones(4, 1), Matrix::Identity(4, 4));
    const double t = 0.7;
    const Matrix expect = expm_series(t * a);
    EXPECT_LT((semigroup(sys, t) - expect).norm(), 1e-12 * expect.norm()) << "seed " << seed;
  }
}

TEST(Semigroup, PropertyAndIdentity) {
  const Matrix a = random_matrix(3, 3, 9);
  const auto sys = make_system(a, Matrix::Ones(3, 1), Matrix::Identity(3, 3));
  EXPECT_TRUE(semigroup(sys, 0.0).isApprox(Matrix::Identity(3, 3)));
  const Matrix lhs = semigroup(sys, 1.1);
  const Matrix rhs = semigroup(sys, 0.4) * semigroup(sys, 0.7);
  EXPECT_LT((lhs - rhs).norm(), 1e-12 * lhs.norm());
  EXPECT_THROW(semigroup(sys, -1.0), InputError);
}

TEST(Yosida, ScalarClosedForm) {
  const auto sys = make_system(scalar(-1.0), scalar(2.0), scalar(1.0));
  for (double k : {0.5, 1.0, 10.0, 1000.0}) {
    EXPECT_NEAR(yosida(sys, k)(0, 0), k / (k + 1.0), 1e-15);
    EXPECT_NEAR(approx_control_operator(sys, k)(0, 0), 2.0 * k / (k + 1.0), 1e-14);
  }
}

TEST(Yosida, ConvergesToIdentity) {
  const auto sys = heat_1d(10).sys;
  double previous = std::numeric_limits<double>::infinity();
  for (double k : {1e2, 1e3, 1e4, 1e5}) {
    const double err = (yosida(sys, k) - Matrix::Identity(10, 10)).norm();
    EXPECT_LT(err, previous);
    previous = err;
  }
  EXPECT_LT(previous, 1e-2);
}

TEST(Yosida, InvalidParameter) {
  const auto unstable = make_system(scalar(2.0), scalar(1.0), scalar(1.0));
  EXPECT_THROW(yosida(unstable, 2.0), InputError);  // kI - A singular
  EXPECT_THROW(yosida(unstable, 1.0), InputError);  // below the abscissa
  const auto sys = make_system(scalar(-1.0), scalar(1.0), scalar(1.0));
  EXPECT_THROW(yosida(sys, 0.0), InputError);
  EXPECT_THROW(yosida(sys, -3.0), InputError);
}

TEST(Gramian, ScalarClosedForm) {
  // int_0^1 e^{-2t} dt; trapezoid error is h^2/12 * (f'(1) - f'(0)).
  const double exact = 0.5 * (1.0 - std::exp(-2.0));
  EXPECT_NEAR(observability_gramian(scalar(-1.0), scalar(1.0), 1.0, 8192)(0, 0), exact, 1e-8);
  EXPECT_NEAR(observability_gramian(scalar(0.0), scalar(1.0), 2.0)(0, 0), 2.0, 1e-13);
}

TEST(Gramian, SecondOrderInSteps) {
  const double exact = 0.5 * (1.0 - std::exp(-2.0));
  const double e1 = std::abs(observability_gramian(scalar(-1.0), scalar(1.0), 1.0, 64)(0, 0) - exact);
  const double e2 = std::abs(observability_gramian(scalar(-1.0), scalar(1.0), 1.0, 128)(0, 0) - exact);
  EXPECT_NEAR(e1 / e2, 4.0, 0.05);
}

TEST(Gramian, SymmetricPositiveSemidefinite) {
  const Matrix m = random_matrix(4, 4, 11);
  const Matrix n = random_matrix(2, 4, 12);
  const Matrix g = observability_gramian(m, n, 1.0);
  EXPECT_LT((g - g.transpose()).norm(), 1e-13 * g.norm());
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_THROW(observability_gramian(m, n, 0.0), InputError);
  EXPECT_THROW(observability_gramian(m, random_matrix(2, 3, 1), 1.0), InputError);
}

TEST(Hypotheses, ScalarAllSatisfied) {
  const auto s = scalar_example();
  const auto r = check_hypotheses(s.sys);
  EXPECT_TRUE(r.all_satisfied());
  EXPECT_NEAR(r.delta, 1.0, 1e-15);
  EXPECT_GT(r.obs_ac, 0.0);
}

TEST(Hypotheses, HeatSatisfiedDespiteTinyGramianEigenvalues) {
  const auto r = check_hypotheses(heat_1d(50).sys);
  EXPECT_TRUE(r.all_satisfied());
  EXPECT_NEAR(r.delta, 1.0, 1e-12);
}

TEST(Hypotheses, DetectsHiddenMode) {
  Matrix a(2, 2);
  a << -1.0, 0.0, 0.0, -2.0;
  Matrix c = Matrix::Zero(2, 2);
  c(0, 0) = 1.0;
  const auto r = check_hypotheses(make_system(a, Matrix::Ones(2, 1), c));
  EXPECT_FALSE(r.observable_ac);
  EXPECT_FALSE(r.coercive());
  EXPECT_TRUE(r.ker_ac_trivial);  // A itself is invertible
  EXPECT_FALSE(r.all_satisfied());
}

TEST(Hypotheses, DetectsKernelIntersection) {
  const auto r = check_hypotheses(make_system(scalar(0.0), scalar(0.0), scalar(1.0)));
  EXPECT_FALSE(r.ker_astar_bstar_trivial);
  EXPECT_FALSE(r.observable_astar_bstar);
  EXPECT_TRUE(r.ker_ac_trivial);
}

TEST(Rank, PbhAndStackedRank) {
  Matrix m(2, 2);
  m << 0.0, 1.0, 0.0, 0.0;  // double integrator
  Matrix position(1, 2), velocity(1, 2);
  position << 1.0, 0.0;
  velocity << 0.0, 1.0;
  EXPECT_TRUE(pbh_observable(m, position, 1e-10));
  EXPECT_FALSE(pbh_observable(m, velocity, 1e-10));
  EXPECT_TRUE(full_column_rank(Matrix::Identity(2, 2), Matrix::Zero(1, 2), 1e-12));
  EXPECT_FALSE(full_column_rank(Matrix::Zero(2, 2), velocity, 1e-12));
}

TEST(Linalg, SpectralAbscissaAndLyapunov) {
  Matrix a(2, 2);
  a << -1.0, 3.0, 0.0, -2.0;
  EXPECT_NEAR(linalg::spectral_abscissa(a), -1.0, 1e-14);
  const Matrix q = Matrix::Identity(2, 2);
  const Matrix x = linalg::solve_lyapunov(a, q);
  EXPECT_LT((a.transpose() * x + x * a + q).norm(), 1e-13);
  EXPECT_LE(linalg::norm2_bound(a), std::sqrt(a.cwiseAbs().colwise().sum().maxCoeff() *
                                              a.cwiseAbs().rowwise().sum().maxCoeff()) + 1e-15);
}
