#include <string>

#include <gtest/gtest.h>

#include "lqt/common.hpp"
#include "lqt/verify.hpp"

using namespace lqt;

TEST(Verify, ParsesNames) {
  EXPECT_EQ(parse_suite("quick"), Suite::kQuick);
  EXPECT_EQ(parse_suite("full"), Suite::kFull);
  EXPECT_THROW(parse_suite("medium"), InputError);
  EXPECT_EQ(parse_fault("none"), Fault::kNone);
  EXPECT_EQ(parse_fault("corrupt-are"), Fault::kCorruptAre);
  EXPECT_EQ(parse_fault("internal-error"), Fault::kInternalError);
  EXPECT_THROW(parse_fault("flip-bits"), InputError);
}

TEST(Verify, LineFormat) {
  CriterionResult r;
  r.id = 7;
  r.name = "turnpike bound";
  r.passed = false;
  r.seconds = 0.25;
  r.time_limit = 30.0;
  r.detail = "ratio 0.3 [FAIL]";
  EXPECT_EQ(format_line(r), "FAIL [ 7] turnpike bound (0.250 s / 30 s): ratio 0.3 [FAIL]");
  r.passed = true;
  EXPECT_EQ(format_line(r).substr(0, 9), "PASS [ 7]");
}

TEST(Verify, ArtifactsIndependentOfJobCount) {
  const auto a = verification_artifacts(1);
  const auto b = verification_artifacts(3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_TRUE(a[i].second == b[i].second) << a[i].first;
  }
}

TEST(Verify, CorruptedAreChangesArtifacts) {
  const auto clean = verification_artifacts(2);
  const auto corrupt = verification_artifacts(2, Fault::kCorruptAre);
  EXPECT_NE(clean[1].second, corrupt[1].second);  // turnpike summary
}

TEST(Verify, InternalFaultThrows) {
  VerifyOptions o;
  o.fault = Fault::kInternalError;
  EXPECT_THROW(run_verification(o), Error);
}
