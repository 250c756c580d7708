#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "lqt/csv.hpp"
#include "lqt/linalg.hpp"
#include "lqt/scenarios.hpp"

using namespace lqt;

namespace {

std::string error_of(const std::string& json) {
  try {
    parse_config(json);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(SplitMix64, ReferenceSequence) {
  SplitMix64 rng(1234567);
  EXPECT_EQ(rng.next(), 6457827717110365317ULL);
  EXPECT_EQ(rng.next(), 3203168211198807973ULL);
  EXPECT_EQ(rng.next(), 9817491932198370423ULL);
  EXPECT_EQ(rng.next(), 4593380528125082431ULL);
  EXPECT_EQ(rng.next(), 16408922859458223821ULL);
  SplitMix64 zero(0);
  EXPECT_EQ(zero.next(), 0xE220A8397B1DCDAFULL);
}

TEST(SplitMix64, UniformRange) {
  SplitMix64 rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = rng.uniform(-2.0, 3.0);
    ASSERT_GE(v, -2.0);
    ASSERT_LT(v, 3.0);
  }
}

TEST(Scalar, Example) {
  const auto s = scalar_example();
  EXPECT_EQ(s.sys.a()(0, 0), -1.0);
  EXPECT_EQ(s.sys.b()(0, 0), 1.0);
  EXPECT_EQ(s.sys.c()(0, 0), 1.0);
  EXPECT_EQ(s.target(0), 1.0);
  EXPECT_EQ(s.x0(0), 0.0);
}

TEST(RandomStable, DeterministicShiftedAndRegularized) {
  const auto a = random_stable(5, 2, 17, 0.5);
  const auto b = random_stable(5, 2, 17, 0.5);
  EXPECT_EQ(a.a(), b.a());
  EXPECT_EQ(a.b(), b.b());
  EXPECT_EQ(a.c(), b.c());
  EXPECT_NE(random_stable(5, 2, 18, 0.5).a(), a.a());
  EXPECT_NEAR(linalg::spectral_abscissa(a.a()), -0.5, 1e-10);
  Eigen::JacobiSVD<Matrix> svd(a.c());
  EXPECT_GE(svd.singularValues().minCoeff(), 0.1 - 1e-12);
  EXPECT_THROW(random_stable(0, 1, 1, 0.5), InputError);
  EXPECT_THROW(random_stable(2, 1, 1, 0.0), InputError);
}

TEST(RandomStable, DefaultDrawPassesHypotheses) {
  const auto draw = random_stable_checked(4, 2, 42, 0.5);
  EXPECT_TRUE(check_hypotheses(draw.sys).all_satisfied());
  EXPECT_GE(draw.seed, 42u);
  EXPECT_EQ(draw.rejected.size(), draw.seed - 42);
}

TEST(Heat, StencilAndControls) {
  const auto s = heat_1d(3);
  Matrix expect(3, 3);
  expect << -2, 1, 0, 1, -2, 1, 0, 1, -2;
  EXPECT_EQ(s.sys.a(), 16.0 * expect);
  EXPECT_EQ(s.sys.c(), Matrix::Identity(3, 3));
  double previous = 0.0;
  for (int n : {25, 50, 100}) {
    HeatOptions o;
    o.control = HeatControl::kBoundary;
    const double norm = heat_1d(n, o).sys.b().norm();
    EXPECT_NEAR(norm, n + 1.0, 1e-12);
    EXPECT_GT(norm, previous);
    previous = norm;
  }
  EXPECT_THROW(heat_1d(2), InputError);
  HeatOptions bad;
  bad.profile = "zigzag";
  EXPECT_THROW(heat_1d(10, bad), InputError);
}

TEST(Heat, Profiles) {
  const Vector bump = heat_profile("bump", 3);
  EXPECT_NEAR(bump(1), 1.0, 1e-15);  // 4 * 0.5 * 0.5
  EXPECT_NEAR(bump(0), 0.75, 1e-15);
  EXPECT_NEAR(heat_profile("sine", 1)(0), 1.0, 1e-15);
  EXPECT_EQ(heat_profile("zero", 4).norm(), 0.0);
  EXPECT_THROW(heat_profile("zigzag", 4), InputError);
}

TEST(Config, MinimalScalarFillsDefaults) {
  const auto c = parse_config(R"({"scenario": "scalar"})");
  EXPECT_EQ(c.n, 1);
  EXPECT_EQ(c.m, 1);
  EXPECT_DOUBLE_EQ(c.dt, 1e-3);
  EXPECT_DOUBLE_EQ(c.t0, 1.0);
  EXPECT_EQ(c.horizons, std::vector<double>{10.0});
  EXPECT_EQ(c.solver, "transcription");
  EXPECT_EQ(c.ks.size(), 10u);
}

TEST(Config, HeatDefaults) {
  const auto c = parse_config(R"({"scenario": "heat_1d"})");
  EXPECT_EQ(c.n, 50);
  EXPECT_DOUBLE_EQ(c.dt, 1e-2);
  EXPECT_EQ(c.solver, "sweep");
}

TEST(Config, ValidationMessages) {
  const auto dt = error_of(R"({"scenario": "scalar", "horizons": [1.0], "dt": 0.3})");
  EXPECT_NE(dt.find("dt=0.29999999999999999"), std::string::npos) << dt;
  EXPECT_NE(dt.find("T=1"), std::string::npos) << dt;
  const auto name = error_of(R"({"scenario": "wave"})");
  EXPECT_NE(name.find("heat_1d"), std::string::npos) << name;
  EXPECT_NE(name.find("random_stable"), std::string::npos) << name;
  const auto key = error_of(R"({"scenario": "scalar", "horizon": 3})");
  EXPECT_NE(key.find("unknown config key 'horizon'"), std::string::npos) << key;
  const auto syntax = error_of("{\n  \"scenario\": \"scalar\",\n  oops\n}");
  EXPECT_NE(syntax.find("line 3"), std::string::npos) << syntax;
  const auto many = error_of(R"({"scenario": "random_stable", "n": 0, "margin": -1})");
  EXPECT_NE(many.find("n must be at least 1"), std::string::npos) << many;
  EXPECT_NE(many.find("margin must be positive"), std::string::npos) << many;
  EXPECT_FALSE(error_of(R"({"n": 2})").empty());
}

TEST(Config, JsonRoundTrip) {
  const auto c = parse_config(
      R"({"scenario": "random_stable", "seed": 7, "horizons": [10, 20], "target": [1, 2, 3, 4], "x0": "xbar"})");
  const auto again = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
  EXPECT_EQ(again.seed, 7u);
  EXPECT_EQ(again.target_values, (std::vector<double>{1, 2, 3, 4}));
}

TEST(Config, BuildsScenarios) {
  auto c = parse_config(R"({"scenario": "random_stable", "seed": 42})");
  const auto a = build_scenario(c);
  const auto b = build_scenario(c);
  EXPECT_EQ(a.sys.a(), b.sys.a());
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.sys.n(), 4);
  const auto custom = build_scenario(parse_config(
      R"({"scenario": "custom", "A": [[-1, 0], [0, -2]], "B": [[1], [0]], "C": [[1, 0], [0, 1]],
          "target": [1, 0], "x0": [0, 1]})"));
  EXPECT_EQ(custom.sys.a()(1, 1), -2.0);
  EXPECT_EQ(custom.target(0), 1.0);
  EXPECT_EQ(custom.x0(1), 1.0);
  const auto heat = build_scenario(parse_config(R"({"scenario": "heat_1d", "n": 10, "target": "sine"})"));
  EXPECT_NEAR(heat.target(0), std::sin(M_PI / 11.0), 1e-15);
}

TEST(Csv, RoundTripFormatting) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::sqrt(2.0)}) {
    EXPECT_EQ(std::stod(csv::format(v)), v);
  }
}
