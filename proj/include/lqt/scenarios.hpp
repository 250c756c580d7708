#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lqt/common.hpp"
#include "lqt/operators.hpp"

namespace lqt {

// SplitMix64 (Steele, Lea, Flood 2014): state += 0x9E3779B97F4A7C15, then the
// variant-13 finalizer. Portable and bit-reproducible across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // Uniform on [0, 1) from the top 53 bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

struct Scenario {
  std::string name;
  LtiSystem sys;
  Vector target;
  Vector x0;
};

// A = [[-1]], B = [[1]], C = [[1]], z = [1], x0 = [0].
Scenario scalar_example();

// Entries of A, B, C uniform on [-1, 1) drawn in that order (column-major);
// A is shifted so its spectral abscissa is -margin, and the singular values of
// C are clamped to at least 0.1.
LtiSystem random_stable(int n, int m, std::uint64_t seed, double margin);

struct RandomDraw {
  LtiSystem sys;
  std::uint64_t seed = 0;              // seed of the accepted draw
  std::vector<std::uint64_t> rejected; // seeds whose draw failed check_hypotheses
};

// random_stable, redrawn with seed + 1, seed + 2, ... until check_hypotheses
// passes (at most `max_draws` attempts).
RandomDraw random_stable_checked(int n, int m, std::uint64_t seed, double margin,
                                 int max_draws = 64);

enum class HeatControl { kDistributed, kBoundary };

struct HeatOptions {
  HeatControl control = HeatControl::kDistributed;
  // Indicator support for distributed control, as a sub-interval of (0, 1).
  double lo = 0.25;
  double hi = 0.5;
  std::string profile = "bump";
};

// Finite differences on (0, 1) with Dirichlet ends: A = (n+1)^2 tridiag(1, -2, 1),
// C = I. Distributed control is the indicator column of [lo, hi]; boundary
// control is e_1 / dx. Profiles: bump 4x(1-x), sine sin(pi x), zero.
Scenario heat_1d(int n, const HeatOptions& options = {});

// Samples a named target profile at the interior nodes x_i = i / (n + 1).
Vector heat_profile(const std::string& name, int n);

struct Tolerances {
  double are = 1e-10;
  double stationary = 1e-10;
  double propagation = 1e-4;
  double energy = 1e-4;
};

struct ExperimentConfig {
  std::string scenario = "scalar";  // scalar | random_stable | heat_1d | custom
  int n = 1;
  int m = 1;
  std::uint64_t seed = 42;
  double margin = 0.5;
  std::vector<double> horizons;
  double dt = 1e-3;
  double t0 = 1.0;
  // Target: "default" (scenario's own), "zero", a heat profile name, or values.
  std::string target = "default";
  std::vector<double> target_values;
  // Initial state: "default", "zero", "xbar", or values.
  std::string x0 = "default";
  std::vector<double> x0_values;
  std::vector<double> ks;
  std::string heat_control = "distributed";
  double control_lo = 0.25;
  double control_hi = 0.5;
  std::string solver = "transcription";
  Tolerances tolerances;
  std::string output_dir;
  // Row-major matrices for the custom scenario.
  std::vector<std::vector<double>> a, b, c;
};

// Parses and validates a JSON document. Unknown keys are rejected; missing
// fields take scenario-dependent defaults (dt 1e-3, or 1e-2 for heat_1d).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Re-validates after command-line overrides.
void validate_config(const ExperimentConfig& config);

// Builds the system, target and default initial state named by the config.
// An x0 of "xbar" is left to the caller (it needs the stationary solve) and
// comes back as zeros.
Scenario build_scenario(const ExperimentConfig& config);

// The config as JSON text, for manifests.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace lqt
