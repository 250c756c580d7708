// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [quick|full] [jobs]

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include "lqt/verify.hpp"

int main(int argc, char** argv) {
  try {
    lqt::VerifyOptions options;
    options.suite = lqt::parse_suite(argc > 1 ? argv[1] : "full");
    options.jobs = argc > 2 ? std::atoi(argv[2]) : 4;
    const auto report = lqt::run_verification(options);
    for (const auto& c : report.criteria) std::printf("%s\n", lqt::format_line(c).c_str());
    std::printf("%zu criteria, %s, %.1f s\n", report.criteria.size(),
                report.passed() ? "all passed" : "FAILURES", report.seconds);
    return report.passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance: %s\n", e.what());
    return 3;
  }
}
