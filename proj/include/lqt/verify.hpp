#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lqt {

// quick runs every criterion at its stated settings; full adds extra
// refinement levels and scenarios on top.
enum class Suite { kQuick, kFull };

Suite parse_suite(const std::string& name);
std::string suite_name(Suite suite);

// Deliberate corruption used to exercise the failure paths: a perturbed
// Riccati solution (criteria fail) or an internal error before any criterion.
enum class Fault { kNone, kCorruptAre, kInternalError };

Fault parse_fault(const std::string& name);

struct VerifyOptions {
  Suite suite = Suite::kQuick;
  Fault fault = Fault::kNone;
  int jobs = 1;
  // Job count of the second artifact pass in the determinism check.
  int alternate_jobs = 4;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  double time_limit = 0.0;
  std::string detail;
};

// Named CSV documents, in emission order.
using Artifacts = std::vector<std::pair<std::string, std::string>>;

struct VerifyReport {
  std::vector<CriterionResult> criteria;
  Artifacts artifacts;
  double seconds = 0.0;

  bool passed() const;
};

// Runs the acceptance criteria in order. Each criterion catches its own
// errors and reports them as a failure.
VerifyReport run_verification(const VerifyOptions& options);

// The deterministic CSV set written by the verify command.
Artifacts verification_artifacts(int jobs, Fault fault = Fault::kNone);

// `PASS [ 1] name (0.012 s / 0.1 s): detail`
std::string format_line(const CriterionResult& result);

void write_artifacts(const std::filesystem::path& dir, const Artifacts& artifacts);

}  // namespace lqt
