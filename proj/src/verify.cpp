#include "lqt/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <tuple>

#include "lqt/csv.hpp"
#include "lqt/lq.hpp"
#include "lqt/riccati.hpp"
#include "lqt/scenarios.hpp"
#include "lqt/stationary.hpp"
#include "lqt/turnpike.hpp"

namespace lqt {

Suite parse_suite(const std::string& name) {
  if (name == "quick") return Suite::kQuick;
  if (name == "full") return Suite::kFull;
  throw InputError("unknown suite '" + name + "' (valid: full, quick)");
}

std::string suite_name(Suite suite) { return suite == Suite::kQuick ? "quick" : "full"; }

Fault parse_fault(const std::string& name) {
  if (name == "none") return Fault::kNone;
  if (name == "corrupt-are") return Fault::kCorruptAre;
  if (name == "internal-error") return Fault::kInternalError;
  throw InputError("unknown fault '" + name + "' (valid: corrupt-are, internal-error, none)");
}

bool VerifyReport::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed; });
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

AreSolution are_for(const LtiSystem& sys, Fault fault) {
  AreSolution are = solve_are(sys);
  if (fault == Fault::kCorruptAre) {
    are.p += 1e-3 * Matrix::Identity(sys.n(), sys.n());
  }
  return are;
}

Scenario random_scenario(std::uint64_t seed) {
  ExperimentConfig config = parse_config(R"({"scenario": "random_stable"})");
  config.seed = seed;
  return build_scenario(config);
}

std::vector<double> powers_of_two(int lo, int hi) {
  std::vector<double> ks;
  for (int e = lo; e <= hi; ++e) ks.push_back(std::ldexp(1.0, e));
  return ks;
}

// Outcome of one criterion body: pass flag and a short human summary.
struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
    if (!ok) {
      passed = false;
      detail += " [FAIL]";
    }
  }
};

CriterionResult run_criterion(int id, std::string name, double limit,
                              const std::function<Outcome()>& body) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  r.time_limit = limit;
  const auto start = Clock::now();
  try {
    Outcome o = body();
    r.passed = o.passed;
    r.detail = std::move(o.detail);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = since(start);
  if (r.seconds > limit) {
    r.passed = false;
    r.detail += "; over time limit [FAIL]";
  }
  return r;
}

// max_k |y_k - P_T(t_k) x_k| for z = 0 and p0 = 0.
double state_adjoint_defect(const LtiSystem& sys, const Vector& x0, double horizon, double dt) {
  const int n = sys.n();
  const auto prob = make_problem(sys, horizon, Vector::Zero(n), x0, Matrix::Zero(n, n), dt);
  const Trajectory traj = solve_transcription(prob);
  const DreSolution dre = solve_dre(sys, horizon, Matrix::Zero(n, n), prob.steps());
  double defect = 0.0;
  for (int k = 0; k < traj.nodes(); ++k) {
    defect = std::max(defect, (traj.y.col(k) - dre.p_samples[k] * traj.x.col(k)).norm());
  }
  return defect;
}

double propagation_for(const Scenario& s, double horizon, double dt, LqSolver solver, Fault fault) {
  const int n = s.sys.n();
  const auto stat = solve_stationary(s.sys, s.target);
  const auto are = are_for(s.sys, fault);
  const auto prob = make_problem(s.sys, horizon, s.target, s.x0, Matrix::Zero(n, n), dt);
  const Trajectory traj = solve_lq(prob, solver);
  return propagation_residual(h_trajectory(traj, stat, are), s.sys, are, traj.grid);
}

std::vector<TurnpikeReport> turnpike_for(const Scenario& s, const std::vector<double>& horizons,
                                         double dt, int jobs, Fault fault) {
  const auto stat = solve_stationary(s.sys, s.target);
  const auto are = are_for(s.sys, fault);
  TurnpikeOptions o;
  o.x0 = s.x0;
  o.target = s.target;
  o.dt = dt;
  o.jobs = jobs;
  return verify_turnpike(s.sys, stat, are, horizons, o);
}

// Smooth data: sum_j a_j sin(omega_j t + phi_j) per component, |a_j| <= 1,
// omega_j in [0.5, 3].
class TrigField {
 public:
  TrigField(int rows, SplitMix64& rng) : a_(rows, 3), w_(rows, 3), p_(rows, 3) {
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < 3; ++j) {
        a_(i, j) = rng.uniform(-1.0, 1.0);
        w_(i, j) = rng.uniform(0.5, 3.0);
        p_(i, j) = rng.uniform(0.0, 6.283185307179586);
      }
    }
  }
  Matrix sample(const std::vector<double>& grid) const {
    Matrix out = Matrix::Zero(a_.rows(), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (Eigen::Index i = 0; i < a_.rows(); ++i) {
        for (int j = 0; j < 3; ++j) {
          out(i, static_cast<Eigen::Index>(k)) += a_(i, j) * std::sin(w_(i, j) * grid[k] + p_(i, j));
        }
      }
    }
    return out;
  }

 private:
  Matrix a_, w_, p_;
};

std::vector<double> uniform_grid(double horizon, double dt) {
  const int steps = static_cast<int>(std::lround(horizon / dt));
  std::vector<double> g(steps + 1);
  for (int k = 0; k <= steps; ++k) g[k] = horizon * k / steps;
  return g;
}

// One seeded duality dataset on [0, 1], evaluated at several step sizes.
std::vector<double> duality_levels(std::uint64_t seed, const std::vector<double>& dts) {
  const LtiSystem sys = random_stable(3, 2, seed, 0.5);
  SplitMix64 rng(seed * 0x9E3779B97F4A7C15ULL + 1);
  const int n = sys.n();
  Vector y0(n), zt(n);
  for (int i = 0; i < n; ++i) y0(i) = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < n; ++i) zt(i) = rng.uniform(-1.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n * n; ++i) m(i) = rng.uniform(-0.5, 0.5);
  const TrigField f(n, rng), u(sys.m(), rng), g(n, rng);
  std::vector<double> out;
  for (double dt : dts) {
    const auto grid = uniform_grid(1.0, dt);
    DualityForward fw{y0, f.sample(grid), u.sample(grid), m};
    DualityBackward bw{zt, g.sample(grid)};
    out.push_back(duality_residual(sys, fw, bw, 1.0, dt));
  }
  return out;
}

bool nonincreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) return false;
  }
  return true;
}

// Largest drop of the cost under random smooth perturbations of the optimal
// discrete control (negative means a perturbation beat the optimum).
double optimality_margin(const LqProblem& prob, int samples, std::uint64_t seed) {
  const Trajectory opt = solve_transcription(prob);
  const double j0 = discrete_cost(prob, opt.u_applied);
  const auto& grid = opt.grid;
  SplitMix64 rng(seed);
  double margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const TrigField field(prob.sys.m(), rng);
    const double eps = std::pow(10.0, rng.uniform(-2.0, 0.0));
    const Matrix u = opt.u_applied + eps * field.sample(grid);
    margin = std::min(margin, discrete_cost(prob, u) - j0);
  }
  return margin;
}

std::string to_csv(const std::function<void(std::ostream&)>& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace

Artifacts verification_artifacts(int jobs, Fault fault) {
  Artifacts out;
  const Scenario scalar = scalar_example();
  const auto reports = turnpike_for(scalar, {5.0, 10.0, 20.0, 40.0}, 1e-3, jobs, fault);
  out.emplace_back("scalar_turnpike_report.csv",
                   to_csv([&](std::ostream& os) { write_report_csv(os, reports); }));
  out.emplace_back("scalar_turnpike_summary.csv",
                   to_csv([&](std::ostream& os) { write_summary_csv(os, reports); }));

  const Scenario random = random_scenario(42);
  const double lambda = closed_loop_generator(random.sys, are_for(random.sys, fault)).lambda;
  const double t1 = std::ceil(10.0 / lambda);
  const auto random_reports = turnpike_for(random, {t1, 2.0 * t1}, 1e-3, jobs, fault);
  out.emplace_back("random_stable_turnpike_summary.csv",
                   to_csv([&](std::ostream& os) { write_summary_csv(os, random_reports); }));

  const auto ks = powers_of_two(1, 10);
  const auto stat_rows = stationary_convergence_study(scalar.sys, scalar.target, ks, {}, jobs);
  out.emplace_back("scalar_yosida_stationary.csv",
                   to_csv([&](std::ostream& os) { write_study_csv(os, stat_rows); }));
  const auto prob = make_problem(scalar.sys, 10.0, scalar.target, scalar.x0, Matrix::Zero(1, 1), 1e-3);
  const auto dyn_rows = yosida_dynamic_study(prob, ks, LqSolver::kTranscription, jobs);
  out.emplace_back("scalar_yosida_dynamic.csv",
                   to_csv([&](std::ostream& os) { write_yosida_csv(os, dyn_rows); }));

  const DreSolution dre = solve_dre(scalar.sys, 5.0, Matrix::Zero(1, 1), 50);
  out.emplace_back("scalar_dre.csv", to_csv([&](std::ostream& os) { write_dre_csv(os, dre); }));
  const auto coarse =
      make_problem(scalar.sys, 10.0, scalar.target, scalar.x0, Matrix::Zero(1, 1), 1e-2);
  const Trajectory traj = solve_transcription(coarse);
  out.emplace_back("scalar_trajectory.csv",
                   to_csv([&](std::ostream& os) { write_trajectory_csv(os, traj); }));
  return out;
}

VerifyReport run_verification(const VerifyOptions& options) {
  const auto start = Clock::now();
  const bool full = options.suite == Suite::kFull;
  const Fault fault = options.fault;
  if (fault == Fault::kInternalError) throw Error("injected internal error");
  VerifyReport report;
  auto add = [&](int id, std::string name, double limit, const std::function<Outcome()>& body) {
    report.criteria.push_back(run_criterion(id, std::move(name), limit, body));
  };

  add(1, "scalar ARE", 0.1, [&] {
    const Scenario s = scalar_example();
    const AreSolution are = are_for(s.sys, fault);
    // Positive root of 2 a p + c^2 - b^2 p^2 = 0.
    const double a = -1.0, b = 1.0, c = 1.0;
    const double p_exact = (a + std::sqrt(a * a + b * b * c * c)) / (b * b);
    const double abscissa_exact = a - b * b * p_exact;
    const double abscissa = -closed_loop_generator(s.sys, are).lambda;
    Outcome o;
    o.require(std::abs(are.p(0, 0) - p_exact) <= 1e-10, "|P - P*| = " + sci(std::abs(are.p(0, 0) - p_exact)));
    o.require(std::abs(abscissa - abscissa_exact) <= 1e-10,
              "|abscissa + sqrt2| = " + sci(std::abs(abscissa - abscissa_exact)));
    return o;
  });

  add(2, "scalar stationary triple", 0.1, [&] {
    const Scenario s = scalar_example();
    const StationaryTriple st = solve_stationary(s.sys, s.target);
    // Eliminating u = -a x / b and y = -u / b from the KKT system.
    const double a = -1.0, b = 1.0, c = 1.0, z = 1.0;
    const double x = b * b * c * c * z / (a * a + b * b * c * c);
    const double u = -a * x / b;
    const double y = -u / b;
    const double err = std::max({std::abs(st.x_bar(0) - x), std::abs(st.u_bar(0) - u),
                                 std::abs(st.y_bar(0) - y)});
    Outcome o;
    o.require(err <= 1e-12, "triple error " + sci(err));
    o.require(st.max_residual() <= 1e-12, "KKT residual " + sci(st.max_residual()));
    return o;
  });

  add(3, "state-adjoint relation y = P_T x at z = 0", 10.0, [&] {
    Outcome o;
    const Scenario scalar = scalar_example();
    const Scenario random = random_scenario(42);
    const std::vector<std::pair<std::string, std::pair<LtiSystem, Vector>>> cases = {
        {"scalar", {scalar.sys, Vector::Ones(1)}}, {"random", {random.sys, Vector::Ones(4)}}};
    std::vector<double> dts = {1e-3, 5e-4};
    if (full) dts.push_back(2.5e-4);
    for (const auto& [label, data] : cases) {
      std::vector<double> defects;
      for (double dt : dts) defects.push_back(state_adjoint_defect(data.first, data.second, 5.0, dt));
      o.require(defects[0] <= 1e-5, label + " defect " + sci(defects[0]));
      for (std::size_t i = 1; i < defects.size(); ++i) {
        const double ratio = defects[i - 1] / defects[i];
        o.require(ratio >= 3.0, label + " refinement ratio " + sci(ratio));
      }
    }
    return o;
  });

  add(4, "DRE constant at p0 = P", 5.0, [&] {
    Outcome o;
    const Scenario scalar = scalar_example();
    const Scenario random = random_scenario(42);
    for (const auto* s : {&scalar, &random}) {
      const AreSolution are = are_for(s->sys, fault);
      const DreSolution dre = solve_dre(s->sys, 5.0, are.p, 5000);
      double dev = 0.0;
      for (const auto& p : dre.p_samples) dev = std::max(dev, (p - are.p).norm());
      o.require(dev <= 1e-8, s->name + " max |P_T - P| " + sci(dev));
    }
    return o;
  });

  add(5, "propagation identity", 30.0, [&] {
    Outcome o;
    const Scenario scalar = scalar_example();
    const double r1 = propagation_for(scalar, 10.0, 1e-3, LqSolver::kTranscription, fault);
    const double r2 = propagation_for(scalar, 10.0, 5e-4, LqSolver::kTranscription, fault);
    o.require(r1 <= 1e-6, "scalar residual " + sci(r1));
    o.require(r1 / r2 >= 3.0, "scalar halving ratio " + sci(r1 / r2));
    if (full) {
      const double r3 = propagation_for(scalar, 10.0, 2.5e-4, LqSolver::kTranscription, fault);
      o.require(r2 / r3 >= 3.0, "scalar second halving ratio " + sci(r2 / r3));
    }
    const Scenario heat = heat_1d(50);
    const double rh = propagation_for(heat, 20.0, 1e-2, LqSolver::kRiccatiSweep, fault);
    o.require(rh <= 1e-4, "heat residual " + sci(rh));
    return o;
  });

  add(6, "rate recovery", 20.0, [&] {
    Outcome o;
    const Scenario scalar = scalar_example();
    const double sqrt2 = std::sqrt(2.0);
    double worst = 0.0;
    for (const auto& r : turnpike_for(scalar, {10.0, 20.0, 40.0}, 1e-3, options.jobs, fault)) {
      worst = std::max(worst, r.fit_valid ? std::abs(r.fitted_lambda / sqrt2 - 1.0) : 1.0);
    }
    o.require(worst <= 0.02, "scalar worst relative error " + sci(worst));
    std::vector<std::uint64_t> seeds = {42};
    if (full) {
      for (std::uint64_t s = 1; s <= 8; ++s) seeds.push_back(s);
    }
    double worst_random = 0.0;
    for (auto seed : seeds) {
      const Scenario s = random_scenario(seed);
      const double lambda = closed_loop_generator(s.sys, solve_are(s.sys)).lambda;
      const double t1 = std::ceil(10.0 / lambda);
      for (const auto& r : turnpike_for(s, {t1, 2.0 * t1}, 1e-3, options.jobs, fault)) {
        worst_random = std::max(
            worst_random, r.fit_valid ? std::abs(r.fitted_lambda / lambda - 1.0) : 1.0);
      }
    }
    o.require(worst_random <= 0.05, "random-stable worst relative error " + sci(worst_random) +
                                        " over " + std::to_string(seeds.size()) + " seed(s)");
    return o;
  });

  add(7, "turnpike bound", 30.0, [&] {
    Outcome o;
    const Scenario scalar = scalar_example();
    const auto reports = turnpike_for(scalar, {5.0, 10.0, 20.0, 40.0}, 1e-3, options.jobs, fault);
    bool all = true;
    double c_lo = std::numeric_limits<double>::infinity(), c_hi = 0.0;
    for (const auto& r : reports) {
      all = all && r.bound_satisfied;
      c_lo = std::min(c_lo, r.min_c);
      c_hi = std::max(c_hi, r.min_c);
    }
    o.require(all, "bound_satisfied on all horizons, c = " + sci(c_hi));
    o.require(c_hi <= 2.0 * c_lo, "per-horizon constant spread " + sci(c_hi / c_lo));
    const double ratio = reports[2].midpoint_gap_x() / reports[1].midpoint_gap_x();
    o.require(ratio <= 0.2, "midpoint gap ratio T=20/T=10 " + sci(ratio));
    return o;
  });

  add(8, "energy identity", 10.0, [&] {
    Outcome o;
    const Scenario scalar = scalar_example();
    const Scenario heat = heat_1d(50);
    const std::vector<std::tuple<const Scenario*, double, double, double>> cases = {
        {&scalar, 10.0, 1e-3, 1e-6}, {&heat, 20.0, 1e-2, 1e-4}};
    for (const auto& [s, horizon, dt, tol] : cases) {
      const int n = s->sys.n();
      const auto prob = make_problem(s->sys, horizon, s->target, s->x0, Matrix::Zero(n, n), dt);
      const Trajectory traj = solve_transcription(prob);
      const auto e = energy_diagnostics(s->sys, traj, solve_stationary(s->sys, s->target));
      o.require(e.identity_residual <= tol, s->name + " residual " + sci(e.identity_residual));
      o.require(e.cauchy_schwarz_margin >= -tol,
                s->name + " Cauchy-Schwarz margin " + sci(e.cauchy_schwarz_margin));
    }
    return o;
  });

  add(9, "duality identity", 10.0, [&] {
    Outcome o;
    std::vector<double> dts = {2e-3, 1e-3};
    if (full) dts.push_back(5e-4);
    double worst = 0.0, worst_ratio = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto levels = duality_levels(seed, dts);
      worst = std::max(worst, levels[1]);
      for (std::size_t i = 1; i < levels.size(); ++i) {
        worst_ratio = std::min(worst_ratio, levels[i - 1] / levels[i]);
      }
    }
    o.require(worst <= 1e-6, "worst residual at dt=1e-3 " + sci(worst));
    o.require(worst_ratio >= 3.0, "worst halving ratio " + sci(worst_ratio));
    return o;
  });

  add(10, "Yosida convergence", 60.0, [&] {
    Outcome o;
    const Scenario scalar = scalar_example();
    const auto ks = powers_of_two(1, 10);
    const auto rows = stationary_convergence_study(scalar.sys, scalar.target, ks, {}, options.jobs);
    std::vector<double> ex, eu, ey;
    for (const auto& r : rows) {
      ex.push_back(r.err_x);
      eu.push_back(r.err_u);
      ey.push_back(r.err_y);
    }
    for (const auto& [label, e] : {std::pair{"x", ex}, std::pair{"u", eu}, std::pair{"y", ey}}) {
      o.require(nonincreasing(e) && e.back() <= 1e-2 * e.front(),
                std::string("stationary ") + label + " error " + sci(e.front()) + " -> " + sci(e.back()));
    }
    const auto prob =
        make_problem(scalar.sys, 10.0, scalar.target, scalar.x0, Matrix::Zero(1, 1), 1e-3);
    std::vector<double> du;
    for (const auto& r : yosida_dynamic_study(prob, ks, LqSolver::kTranscription, options.jobs)) {
      du.push_back(r.err_u_l2);
    }
    o.require(nonincreasing(du) && du.back() <= 1e-2 * du.front(),
              "dynamic u error " + sci(du.front()) + " -> " + sci(du.back()));
    const Scenario heat = heat_1d(50);
    const auto heat_prob =
        make_problem(heat.sys, 20.0, heat.target, heat.x0, Matrix::Zero(50, 50), 1e-2);
    std::vector<double> hu;
    for (const auto& r :
         yosida_dynamic_study(heat_prob, {10.0, 100.0, 1000.0}, LqSolver::kRiccatiSweep, options.jobs)) {
      hu.push_back(r.err_u_l2);
    }
    bool strict = true;
    for (std::size_t i = 1; i < hu.size(); ++i) strict = strict && hu[i] < hu[i - 1];
    o.require(strict, "heat u error " + sci(hu.front()) + " -> " + sci(hu.back()));
    return o;
  });

  add(11, "optimality sampling", 10.0, [&] {
    Outcome o;
    const Scenario scalar = scalar_example();
    const Scenario random = random_scenario(42);
    for (const auto* s : {&scalar, &random}) {
      const int n = s->sys.n();
      const auto prob = make_problem(s->sys, 10.0, s->target, s->x0, Matrix::Zero(n, n), 1e-3);
      const double margin = optimality_margin(prob, 100, 7);
      o.require(margin >= -1e-12, s->name + " margin " + sci(margin));
    }
    return o;
  });

  report.artifacts = verification_artifacts(options.jobs, fault);

  add(12, "determinism", full ? 300.0 : 60.0, [&] {
    Outcome o;
    const int other = options.alternate_jobs == options.jobs ? options.jobs + 1 : options.alternate_jobs;
    const Artifacts again = verification_artifacts(other, fault);
    bool same = again.size() == report.artifacts.size();
    std::size_t bytes = 0;
    for (std::size_t i = 0; same && i < again.size(); ++i) {
      same = again[i] == report.artifacts[i];
      bytes += again[i].second.size();
    }
    o.require(same, std::to_string(report.artifacts.size()) + " CSVs byte-identical across jobs " +
                        std::to_string(options.jobs) + " and " + std::to_string(other) + " (" +
                        std::to_string(bytes) + " bytes)");
    const double elapsed = since(start);
    o.require(elapsed <= (full ? 300.0 : 60.0), suite_name(options.suite) + " suite wall clock " +
                                                   sci(elapsed) + " s");
    return o;
  });

  report.seconds = since(start);
  return report;
}

std::string format_line(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "%s [%2d] ", r.passed ? "PASS" : "FAIL", r.id);
  char timing[64];
  std::snprintf(timing, sizeof timing, " (%.3f s / %g s): ", r.seconds, r.time_limit);
  return head + r.name + timing + r.detail;
}

void write_artifacts(const std::filesystem::path& dir, const Artifacts& artifacts) {
  for (const auto& [name, contents] : artifacts) csv::write_file(dir / name, contents);
}

}  // namespace lqt
