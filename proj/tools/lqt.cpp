// Command-line front end: lqt <stationary|solve|riccati|turnpike|yosida|verify> [options]
//
// Exit codes: 0 all checks passed, 1 a check failed, 2 input error, 3 internal error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqt/csv.hpp"
#include "lqt/lq.hpp"
#include "lqt/riccati.hpp"
#include "lqt/scenarios.hpp"
#include "lqt/stationary.hpp"
#include "lqt/turnpike.hpp"
#include "lqt/verify.hpp"

#ifndef LQT_VERSION
#define LQT_VERSION "dev"
#endif

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

using namespace lqt;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kInputError = 2;
constexpr int kInternalError = 3;

struct CommonOptions {
  std::string config_path;
  std::string scenario;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_config) {
  if (with_config) {
    cmd->add_option("--config", o.config_path, "JSON experiment config");
    cmd->add_option("--scenario", o.scenario, "built-in scenario with default settings (no --config)");
    cmd->add_option("--T", o.horizon, "single horizon, replaces the config's list");
    cmd->add_option("--dt", o.dt, "time step");
    cmd->add_option("--seed", o.seed, "random_stable seed");
  }
  cmd->add_option("--out", o.out, "output directory (default: $LQT_OUT_DIR, else ./lqt_out)");
  cmd->add_option("--jobs", o.jobs, "worker threads for horizon and k sweeps")->check(CLI::PositiveNumber);
}

// Stage timings and emitted files, written as manifest.json next to the outputs.
class Run {
 public:
  Run(std::string command, fs::path dir) : command_(std::move(command)), dir_(std::move(dir)) {}

  template <class F>
  auto stage(const std::string& name, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
      timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    if constexpr (std::is_void_v<std::invoke_result_t<F&>>) {
      f();
      finish();
    } else {
      auto result = f();
      finish();
      return result;
    }
  }

  void write(const std::string& name, const std::string& contents) {
    csv::write_file(dir_ / name, contents);
    outputs_.push_back(name);
  }

  template <class W>
  void write_csv(const std::string& name, W&& writer) {
    std::ostringstream os;
    writer(os);
    write(name, os.str());
  }

  void finish(const std::optional<ExperimentConfig>& config, int exit_code, Json checks) {
    Json m;
    m["command"] = command_;
    m["version"] = LQT_VERSION;
    m["config"] = config ? Json::parse(config_to_json(*config)) : Json(nullptr);
    m["timings_seconds"] = timings_;
    m["checks"] = std::move(checks);
    m["exit_code"] = exit_code;
    auto outputs = outputs_;
    outputs.push_back("manifest.json");
    m["outputs"] = outputs;
    csv::write_file(dir_ / "manifest.json", m.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

 private:
  std::string command_;
  fs::path dir_;
  Json timings_ = Json::object();
  std::vector<std::string> outputs_;
};

fs::path output_dir(const CommonOptions& o, const std::optional<ExperimentConfig>& config) {
  if (!o.out.empty()) return o.out;
  if (config && !config->output_dir.empty()) return config->output_dir;
  if (const char* env = std::getenv("LQT_OUT_DIR"); env && *env) return env;
  return "lqt_out";
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) {
    if (!o.scenario.empty()) throw InputError("pass either --config or --scenario, not both");
    c = load_config(o.config_path);
  } else if (!o.scenario.empty()) {
    Json j;
    j["scenario"] = o.scenario;
    c = parse_config(j.dump());
  } else {
    throw InputError("one of --config or --scenario is required");
  }
  if (o.horizon) c.horizons = {*o.horizon};
  if (o.dt) c.dt = *o.dt;
  if (o.seed) c.seed = *o.seed;
  validate_config(c);
  return c;
}

std::string horizon_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

// Initial state with "xbar" resolved.
Vector initial_state(const ExperimentConfig& config, const Scenario& s, const StationaryTriple& st) {
  return config.x0 == "xbar" ? st.x_bar : s.x0;
}

StationaryOptions stationary_options(const ExperimentConfig& c) {
  StationaryOptions o;
  o.t0 = c.t0;
  return o;
}

bool nonincreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) return false;
  }
  return true;
}

int cmd_stationary(const CommonOptions& o) {
  const auto config = resolve_config(o);
  Run run("stationary", output_dir(o, config));
  const Scenario s = run.stage("build", [&] { return build_scenario(config); });
  const StationaryTriple st =
      run.stage("solve", [&] { return solve_stationary(s.sys, s.target, stationary_options(config)); });
  run.write_csv("stationary.csv", [&](std::ostream& os) {
    csv::write_header(os, {"quantity", "index", "value"});
    const std::vector<std::pair<const char*, const Vector*>> parts = {
        {"x_bar", &st.x_bar}, {"u_bar", &st.u_bar}, {"y_bar", &st.y_bar}};
    for (const auto& [name, v] : parts) {
      for (Eigen::Index i = 0; i < v->size(); ++i) {
        csv::Row row;
        row << std::string_view(name) << static_cast<long>(i) << (*v)(i);
        csv::write_row(os, row);
      }
    }
    for (const auto& [name, value] : {std::pair{"residual_constraint", st.residual_constraint},
                                      std::pair{"residual_adjoint", st.residual_adjoint},
                                      std::pair{"residual_control", st.residual_control}}) {
      csv::Row row;
      row << std::string_view(name) << 0L << value;
      csv::write_row(os, row);
    }
  });
  const bool ok = st.relative_residual() <= config.tolerances.stationary;
  std::printf("stationary: relative KKT residual %.3g (tolerance %.3g) %s\n", st.relative_residual(),
              config.tolerances.stationary, ok ? "ok" : "FAILED");
  const int code = ok ? kOk : kCheckFailed;
  run.finish(config, code, Json{{"kkt_residual", ok}});
  return code;
}

int cmd_solve(const CommonOptions& o) {
  const auto config = resolve_config(o);
  Run run("solve", output_dir(o, config));
  const Scenario s = run.stage("build", [&] { return build_scenario(config); });
  const Vector x0 = config.x0 == "xbar"
                        ? solve_stationary(s.sys, s.target, stationary_options(config)).x_bar
                        : s.x0;
  const LqSolver solver = parse_solver(config.solver);
  const int n = s.sys.n();
  for (double horizon : config.horizons) {
    const auto prob = make_problem(s.sys, horizon, s.target, x0, Matrix::Zero(n, n), config.dt);
    const Trajectory traj =
        run.stage("solve_T" + horizon_tag(horizon), [&] { return solve_lq(prob, solver); });
    run.write_csv("trajectory_T" + horizon_tag(horizon) + ".csv",
                  [&](std::ostream& os) { write_trajectory_csv(os, traj); });
    std::printf("solve: T=%g solver=%s cost=%.10g\n", horizon, solver_name(solver).c_str(),
                cost(prob, traj));
  }
  run.finish(config, kOk, Json::object());
  return kOk;
}

int cmd_riccati(const CommonOptions& o) {
  const auto config = resolve_config(o);
  Run run("riccati", output_dir(o, config));
  const Scenario s = run.stage("build", [&] { return build_scenario(config); });
  const auto hyp = check_hypotheses(s.sys, config.t0);
  const AreSolution are = run.stage("are", [&] { return solve_are(s.sys); });
  const ClosedLoop cl = closed_loop_generator(s.sys, are);
  run.write_csv("are.csv", [&](std::ostream& os) {
    csv::write_header(os, {"i", "j", "value"});
    for (Eigen::Index i = 0; i < are.p.rows(); ++i) {
      for (Eigen::Index j = 0; j < are.p.cols(); ++j) {
        csv::Row row;
        row << static_cast<long>(i) << static_cast<long>(j) << are.p(i, j);
        csv::write_row(os, row);
      }
    }
  });
  // DRE with p0 = 0 on the first horizon; at most 200 output intervals.
  const double horizon = config.horizons.front();
  const int n = s.sys.n();
  const auto prob = make_problem(s.sys, horizon, s.target, s.x0, Matrix::Zero(n, n), config.dt);
  const DreSolution dre =
      run.stage("dre", [&] { return solve_dre(s.sys, horizon, Matrix::Zero(n, n), prob.steps()); });
  DreSolution thin;
  const int stride = std::max(1, (prob.steps() + 199) / 200);
  for (std::size_t k = 0; k < dre.grid.size(); k += stride) {
    thin.grid.push_back(dre.grid[k]);
    thin.p_samples.push_back(dre.p_samples[k]);
  }
  if ((dre.grid.size() - 1) % stride != 0) {
    thin.grid.push_back(dre.grid.back());
    thin.p_samples.push_back(dre.p_samples.back());
  }
  thin.p0 = dre.p0;
  run.write_csv("dre.csv", [&](std::ostream& os) { write_dre_csv(os, thin); });

  const bool ok = are.residual <= config.tolerances.are && cl.decays;
  std::printf("riccati: ARE residual %.3g (tolerance %.3g), closed-loop rate %.10g, hypotheses %s, "
              "|P_T(0) - P| = %.3g %s\n",
              are.residual, config.tolerances.are, cl.lambda,
              hyp.all_satisfied() ? "satisfied" : "NOT satisfied",
              (dre.p_samples.front() - are.p).norm(), ok ? "ok" : "FAILED");
  const int code = ok ? kOk : kCheckFailed;
  run.finish(config, code, Json{{"are_residual", are.residual <= config.tolerances.are},
                                {"closed_loop_decays", cl.decays}});
  return code;
}

int cmd_turnpike(const CommonOptions& o) {
  const auto config = resolve_config(o);
  Run run("turnpike", output_dir(o, config));
  const Scenario s = run.stage("build", [&] { return build_scenario(config); });
  const auto st = solve_stationary(s.sys, s.target, stationary_options(config));
  const AreSolution are = run.stage("are", [&] { return solve_are(s.sys); });
  TurnpikeOptions t;
  t.x0 = initial_state(config, s, st);
  t.target = s.target;
  t.dt = config.dt;
  t.solver = parse_solver(config.solver);
  t.jobs = o.jobs;
  t.propagation_tol = config.tolerances.propagation;
  const auto reports =
      run.stage("turnpike", [&] { return verify_turnpike(s.sys, st, are, config.horizons, t); });
  run.write_csv("turnpike_report.csv", [&](std::ostream& os) { write_report_csv(os, reports); });
  run.write_csv("turnpike_summary.csv", [&](std::ostream& os) { write_summary_csv(os, reports); });
  bool ok = true;
  Json checks = Json::object();
  for (const auto& r : reports) {
    ok = ok && r.bound_satisfied;
    checks["bound_satisfied_T" + horizon_tag(r.horizon)] = r.bound_satisfied;
    std::printf("turnpike: T=%g fitted_lambda=%.6g (reference %.6g) c=%.4g propagation=%.3g %s\n",
                r.horizon, r.fitted_lambda, r.lambda_reference, r.uniform_c, r.propagation_residual,
                r.bound_satisfied ? "ok" : "FAILED");
  }
  const int code = ok ? kOk : kCheckFailed;
  run.finish(config, code, checks);
  return code;
}

int cmd_yosida(const CommonOptions& o) {
  const auto config = resolve_config(o);
  Run run("yosida", output_dir(o, config));
  const Scenario s = run.stage("build", [&] { return build_scenario(config); });
  const auto st = solve_stationary(s.sys, s.target, stationary_options(config));
  const auto stat_rows = run.stage("stationary_study", [&] {
    return stationary_convergence_study(s.sys, s.target, config.ks, stationary_options(config), o.jobs);
  });
  const int n = s.sys.n();
  const auto prob = make_problem(s.sys, config.horizons.front(), s.target, initial_state(config, s, st),
                                 Matrix::Zero(n, n), config.dt);
  const auto dyn_rows = run.stage("dynamic_study", [&] {
    return yosida_dynamic_study(prob, config.ks, parse_solver(config.solver), o.jobs);
  });
  run.write_csv("yosida_stationary.csv", [&](std::ostream& os) { write_study_csv(os, stat_rows); });
  run.write_csv("yosida_dynamic.csv", [&](std::ostream& os) { write_yosida_csv(os, dyn_rows); });
  std::vector<double> ex, eu, ey, du;
  for (const auto& r : stat_rows) {
    ex.push_back(r.err_x);
    eu.push_back(r.err_u);
    ey.push_back(r.err_y);
  }
  for (const auto& r : dyn_rows) du.push_back(r.err_u_l2);
  const bool stat_ok = nonincreasing(ex) && nonincreasing(eu) && nonincreasing(ey);
  const bool dyn_ok = nonincreasing(du);
  std::printf("yosida: stationary errors %s in k, dynamic u error %.3g -> %.3g %s\n",
              stat_ok ? "nonincreasing" : "NOT monotone", du.front(), du.back(),
              dyn_ok ? "ok" : "FAILED");
  const int code = stat_ok && dyn_ok ? kOk : kCheckFailed;
  run.finish(config, code, Json{{"stationary_monotone", stat_ok}, {"dynamic_monotone", dyn_ok}});
  return code;
}

int cmd_verify(const CommonOptions& o, const std::string& suite, const std::string& fault) {
  VerifyOptions v;
  v.suite = parse_suite(suite);
  v.fault = parse_fault(fault);
  v.jobs = o.jobs;
  Run run("verify", output_dir(o, std::nullopt));
  const VerifyReport report = run.stage("suite", [&] { return run_verification(v); });
  for (const auto& c : report.criteria) std::printf("%s\n", format_line(c).c_str());
  for (const auto& [name, contents] : report.artifacts) run.write(name, contents);
  Json checks = Json::object();
  for (const auto& c : report.criteria) checks[std::to_string(c.id) + " " + c.name] = c.passed;
  const int code = report.passed() ? kOk : kCheckFailed;
  std::printf("%s suite: %s in %.1f s\n", suite_name(v.suite).c_str(),
              report.passed() ? "all criteria passed" : "FAILED", report.seconds);
  run.finish(std::nullopt, code, checks);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-quadratic turnpike toolkit"};
  app.set_version_flag("--version", std::string(LQT_VERSION));
  app.require_subcommand(1);

  CommonOptions o;
  std::string suite = "quick";
  std::string fault = "none";
  std::vector<std::pair<CLI::App*, int (*)(const CommonOptions&)>> commands;
  for (const auto& [name, help, fn] :
       {std::tuple{"stationary", "optimal steady state and KKT residuals", &cmd_stationary},
        std::tuple{"solve", "finite-horizon optimal trajectories", &cmd_solve},
        std::tuple{"riccati", "algebraic and differential Riccati solutions", &cmd_riccati},
        std::tuple{"turnpike", "turnpike gaps, rate fits and bound checks", &cmd_turnpike},
        std::tuple{"yosida", "Yosida-approximated control operator studies", &cmd_yosida}}) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, o, true);
    commands.emplace_back(cmd, fn);
  }
  auto* verify = app.add_subcommand("verify", "acceptance suite");
  add_common(verify, o, false);
  verify->add_option("suite", suite, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  verify->add_option("--inject-fault", fault, "corrupt a stage to exercise failure reporting")
      ->check(CLI::IsMember({"none", "corrupt-are", "internal-error"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (verify->parsed()) return cmd_verify(o, suite, fault);
    for (const auto& [cmd, fn] : commands) {
      if (cmd->parsed()) return fn(o);
    }
    return kInputError;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}
