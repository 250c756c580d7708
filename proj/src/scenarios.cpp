#include "lqt/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/SVD>
#include <json.hpp>

#include "lqt/csv.hpp"
#include "lqt/linalg.hpp"

namespace lqt {

using Json = nlohmann::json;

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

Scenario scalar_example() {
  return Scenario{"scalar",
                  make_system(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0),
                              Matrix::Constant(1, 1, 1.0)),
                  Vector::Constant(1, 1.0), Vector::Zero(1)};
}

LtiSystem random_stable(int n, int m, std::uint64_t seed, double margin) {
  if (n < 1 || m < 1) throw InputError("random_stable: n and m must be at least 1");
  if (!(margin > 0.0)) throw InputError("random_stable: margin must be positive");
  SplitMix64 rng(seed);
  auto draw = [&](int rows, int cols) {
    Matrix out(rows, cols);
    for (Eigen::Index k = 0; k < out.size(); ++k) out(k) = rng.uniform(-1.0, 1.0);
    return out;
  };
  Matrix a = draw(n, n);
  Matrix b = draw(n, m);
  Matrix c = draw(n, n);
  a -= (linalg::spectral_abscissa(a) + margin) * Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector s = svd.singularValues().cwiseMax(0.1);
  c = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  return make_system(std::move(a), std::move(b), std::move(c));
}

RandomDraw random_stable_checked(int n, int m, std::uint64_t seed, double margin, int max_draws) {
  RandomDraw out{random_stable(n, m, seed, margin), seed, {}};
  for (int attempt = 0; attempt < max_draws; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    LtiSystem sys = random_stable(n, m, s, margin);
    if (check_hypotheses(sys).all_satisfied()) {
      out.sys = std::move(sys);
      out.seed = s;
      return out;
    }
    out.rejected.push_back(s);
  }
  throw InputError("random_stable: no draw passed the hypothesis check in " +
                   std::to_string(max_draws) + " attempts from seed " + std::to_string(seed));
}

Vector heat_profile(const std::string& name, int n) {
  Vector z(n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 1.0) / (n + 1.0);
    if (name == "bump") {
      z(i) = 4.0 * x * (1.0 - x);
    } else if (name == "sine") {
      z(i) = std::sin(std::numbers::pi * x);
    } else if (name == "zero") {
      z(i) = 0.0;
    } else {
      throw InputError("unknown profile '" + name + "' (valid: bump, sine, zero)");
    }
  }
  return z;
}

Scenario heat_1d(int n, const HeatOptions& options) {
  if (n < 3) throw InputError("heat_1d: n must be at least 3, got " + std::to_string(n));
  const double inv_dx = n + 1.0;
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = -2.0;
    if (i > 0) a(i, i - 1) = 1.0;
    if (i + 1 < n) a(i, i + 1) = 1.0;
  }
  a *= inv_dx * inv_dx;
  Matrix b = Matrix::Zero(n, 1);
  if (options.control == HeatControl::kBoundary) {
    b(0, 0) = inv_dx;
  } else {
    if (!(options.lo >= 0.0 && options.lo < options.hi && options.hi <= 1.0)) {
      throw InputError("heat_1d: control interval must satisfy 0 <= lo < hi <= 1");
    }
    for (int i = 0; i < n; ++i) {
      const double x = (i + 1.0) / (n + 1.0);
      if (x >= options.lo && x <= options.hi) b(i, 0) = 1.0;
    }
    if (b.norm() == 0.0) throw InputError("heat_1d: control interval contains no grid node");
  }
  Vector z = heat_profile(options.profile, n);
  return Scenario{"heat_1d", make_system(std::move(a), std::move(b), Matrix::Identity(n, n)),
                  std::move(z), Vector::Zero(n)};
}

namespace {

const std::set<std::string> kScenarios = {"scalar", "random_stable", "heat_1d", "custom"};

// Line and column of a byte offset, 1-based.
std::string position(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

template <class T>
T field(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("config field '") + key + "': " + e.what());
  }
}

// A field holding either a keyword string or a list of numbers.
void keyword_or_values(const Json& j, const char* key, std::string& word, std::vector<double>& values) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  if (v.is_string()) {
    word = v.get<std::string>();
    values.clear();
  } else if (v.is_array()) {
    word = "values";
    values = field<std::vector<double>>(j, key, {});
  } else {
    throw InputError(std::string("config field '") + key + "': expected a string or a number list");
  }
}

std::string join_names(const std::set<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  if (!kScenarios.count(c.scenario)) {
    errors.push_back("unknown scenario '" + c.scenario + "' (valid: " + join_names(kScenarios) + ")");
  }
  if (c.n < 1) errors.push_back("n must be at least 1, got " + std::to_string(c.n));
  if (c.scenario == "heat_1d" && c.n < 3) errors.push_back("heat_1d needs n >= 3");
  if (c.m < 1) errors.push_back("m must be at least 1, got " + std::to_string(c.m));
  if (!(c.margin > 0.0)) errors.push_back("margin must be positive");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) errors.push_back("dt must be positive");
  if (!(c.t0 > 0.0)) errors.push_back("t0 must be positive");
  if (c.horizons.empty()) errors.push_back("horizons must be nonempty");
  for (double t : c.horizons) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      errors.push_back("horizon " + csv::format(t) + " must be positive");
      continue;
    }
    if (c.dt > 0.0) {
      const double ratio = t / c.dt;
      if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || std::round(ratio) < 1) {
        errors.push_back("dt=" + csv::format(c.dt) + " does not divide T=" + csv::format(t));
      }
    }
  }
  for (std::size_t i = 0; i < c.ks.size(); ++i) {
    if (!(c.ks[i] > 0.0)) errors.push_back("ks entries must be positive");
    if (i > 0 && !(c.ks[i] > c.ks[i - 1])) errors.push_back("ks must be strictly increasing");
  }
  if (c.solver != "transcription" && c.solver != "sweep") {
    errors.push_back("unknown solver '" + c.solver + "' (valid: sweep, transcription)");
  }
  if (c.heat_control != "distributed" && c.heat_control != "boundary") {
    errors.push_back("unknown heat_control '" + c.heat_control + "' (valid: boundary, distributed)");
  }
  if (!(c.control_lo >= 0.0 && c.control_lo < c.control_hi && c.control_hi <= 1.0)) {
    errors.push_back("control_interval must satisfy 0 <= lo < hi <= 1");
  }
  const std::set<std::string> targets = {"default", "zero", "values", "bump", "sine"};
  if (!targets.count(c.target)) {
    errors.push_back("unknown target '" + c.target + "' (valid: bump, default, sine, zero, or a list)");
  }
  if (c.target == "values" && static_cast<int>(c.target_values.size()) != c.n) {
    errors.push_back("target has " + std::to_string(c.target_values.size()) + " entries, expected n=" +
                     std::to_string(c.n));
  }
  const std::set<std::string> starts = {"default", "zero", "xbar", "values"};
  if (!starts.count(c.x0)) {
    errors.push_back("unknown x0 '" + c.x0 + "' (valid: default, xbar, zero, or a list)");
  }
  if (c.x0 == "values" && static_cast<int>(c.x0_values.size()) != c.n) {
    errors.push_back("x0 has " + std::to_string(c.x0_values.size()) + " entries, expected n=" +
                     std::to_string(c.n));
  }
  for (double tol : {c.tolerances.are, c.tolerances.stationary, c.tolerances.propagation,
                     c.tolerances.energy}) {
    if (!(tol > 0.0)) errors.push_back("tolerances must be positive");
  }
  if (c.scenario == "custom") {
    auto check = [&](const std::vector<std::vector<double>>& rows, const char* name, int r, int cols) {
      if (static_cast<int>(rows.size()) != r) {
        errors.push_back(std::string("custom ") + name + " needs " + std::to_string(r) + " rows");
        return;
      }
      for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != cols) {
          errors.push_back(std::string("custom ") + name + " rows need " + std::to_string(cols) +
                           " entries");
          return;
        }
      }
    };
    check(c.a, "A", c.n, c.n);
    check(c.b, "B", c.n, c.m);
    check(c.c, "C", c.n, c.n);
  }
  if (!errors.empty()) {
    std::string msg = "invalid config: ";
    for (std::size_t i = 0; i < errors.size(); ++i) msg += (i ? "; " : "") + errors[i];
    throw InputError(msg);
  }
}

ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError("config parse error at " + position(text, e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");

  static const std::set<std::string> known = {
      "scenario", "n",       "m",      "seed",         "margin",          "horizons",
      "dt",       "t0",      "target", "x0",           "ks",              "heat_control",
      "control_interval",    "solver", "tolerances",   "output_dir",      "A",
      "B",        "C"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw InputError("unknown config key '" + key + "' (valid: " + join_names(known) + ")");
    }
  }

  ExperimentConfig c;
  c.scenario = field<std::string>(j, "scenario", "");
  if (c.scenario.empty()) throw InputError("config is missing the required field 'scenario'");
  if (!kScenarios.count(c.scenario)) {
    throw InputError("unknown scenario '" + c.scenario + "' (valid: " + join_names(kScenarios) + ")");
  }

  // Scenario-dependent defaults.
  if (c.scenario == "scalar") {
    c.n = c.m = 1;
    c.horizons = {10.0};
  } else if (c.scenario == "random_stable") {
    c.n = 4;
    c.m = 2;
    c.horizons = {20.0};
  } else if (c.scenario == "heat_1d") {
    c.n = 50;
    c.m = 1;
    c.dt = 1e-2;
    c.horizons = {20.0};
    c.ks = {10.0, 100.0, 1000.0};
    c.solver = "sweep";
  } else {
    c.horizons = {10.0};
  }
  if (c.ks.empty()) {
    for (int e = 1; e <= 10; ++e) c.ks.push_back(std::ldexp(1.0, e));
  }
  if (c.scenario == "custom" && j.contains("A")) {
    c.a = field<std::vector<std::vector<double>>>(j, "A", {});
    c.n = static_cast<int>(c.a.size());
    c.b = field<std::vector<std::vector<double>>>(j, "B", {});
    c.m = c.b.empty() ? 0 : static_cast<int>(c.b.front().size());
    c.c = field<std::vector<std::vector<double>>>(j, "C", {});
  }

  c.n = field<int>(j, "n", c.n);
  c.m = field<int>(j, "m", c.m);
  c.seed = field<std::uint64_t>(j, "seed", c.seed);
  c.margin = field<double>(j, "margin", c.margin);
  c.horizons = field<std::vector<double>>(j, "horizons", c.horizons);
  c.dt = field<double>(j, "dt", c.dt);
  c.t0 = field<double>(j, "t0", c.t0);
  keyword_or_values(j, "target", c.target, c.target_values);
  keyword_or_values(j, "x0", c.x0, c.x0_values);
  c.ks = field<std::vector<double>>(j, "ks", c.ks);
  c.heat_control = field<std::string>(j, "heat_control", c.heat_control);
  if (j.contains("control_interval")) {
    const auto iv = field<std::vector<double>>(j, "control_interval", {});
    if (iv.size() != 2) throw InputError("config field 'control_interval': expected [lo, hi]");
    c.control_lo = iv[0];
    c.control_hi = iv[1];
  }
  c.solver = field<std::string>(j, "solver", c.solver);
  c.output_dir = field<std::string>(j, "output_dir", c.output_dir);
  if (j.contains("tolerances")) {
    const Json& t = j.at("tolerances");
    if (!t.is_object()) throw InputError("config field 'tolerances': expected an object");
    static const std::set<std::string> tol_keys = {"are", "stationary", "propagation", "energy"};
    for (const auto& [key, value] : t.items()) {
      if (!tol_keys.count(key)) {
        throw InputError("unknown config key 'tolerances." + key + "' (valid: " +
                         join_names(tol_keys) + ")");
      }
    }
    c.tolerances.are = field<double>(t, "are", c.tolerances.are);
    c.tolerances.stationary = field<double>(t, "stationary", c.tolerances.stationary);
    c.tolerances.propagation = field<double>(t, "propagation", c.tolerances.propagation);
    c.tolerances.energy = field<double>(t, "energy", c.tolerances.energy);
  }
  if (c.scenario == "custom" && c.a.empty()) {
    throw InputError("custom scenario needs matrices A, B and C");
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

Scenario build_scenario(const ExperimentConfig& config) {
  validate_config(config);
  Scenario s = [&]() -> Scenario {
    if (config.scenario == "scalar") return scalar_example();
    if (config.scenario == "random_stable") {
      const auto draw = random_stable_checked(config.n, config.m, config.seed, config.margin);
      SplitMix64 rng(draw.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
      Vector z(config.n);
      for (int i = 0; i < config.n; ++i) z(i) = rng.uniform(-1.0, 1.0);
      return Scenario{"random_stable", draw.sys, z, Vector::Zero(config.n)};
    }
    if (config.scenario == "heat_1d") {
      HeatOptions h;
      h.control = config.heat_control == "boundary" ? HeatControl::kBoundary : HeatControl::kDistributed;
      h.lo = config.control_lo;
      h.hi = config.control_hi;
      return heat_1d(config.n, h);
    }
    auto to_matrix = [](const std::vector<std::vector<double>>& rows) {
      Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
      }
      return m;
    };
    return Scenario{"custom", make_system(to_matrix(config.a), to_matrix(config.b), to_matrix(config.c)),
                    Vector::Zero(config.n), Vector::Zero(config.n)};
  }();

  const int n = s.sys.n();
  if (config.target == "zero") {
    s.target = Vector::Zero(n);
  } else if (config.target == "values") {
    s.target = Eigen::Map<const Vector>(config.target_values.data(), n);
  } else if (config.target != "default") {
    s.target = heat_profile(config.target, n);
  }
  if (config.x0 == "zero" || config.x0 == "xbar") {
    s.x0 = Vector::Zero(n);
  } else if (config.x0 == "values") {
    s.x0 = Eigen::Map<const Vector>(config.x0_values.data(), n);
  }
  return s;
}

std::string config_to_json(const ExperimentConfig& c) {
  Json j;
  j["scenario"] = c.scenario;
  j["n"] = c.n;
  j["m"] = c.m;
  j["seed"] = c.seed;
  j["margin"] = c.margin;
  j["horizons"] = c.horizons;
  j["dt"] = c.dt;
  j["t0"] = c.t0;
  if (c.target == "values") {
    j["target"] = c.target_values;
  } else {
    j["target"] = c.target;
  }
  if (c.x0 == "values") {
    j["x0"] = c.x0_values;
  } else {
    j["x0"] = c.x0;
  }
  j["ks"] = c.ks;
  j["heat_control"] = c.heat_control;
  j["control_interval"] = {c.control_lo, c.control_hi};
  j["solver"] = c.solver;
  j["tolerances"] = {{"are", c.tolerances.are},
                     {"stationary", c.tolerances.stationary},
                     {"propagation", c.tolerances.propagation},
                     {"energy", c.tolerances.energy}};
  j["output_dir"] = c.output_dir;
  if (c.scenario == "custom") {
    j["A"] = c.a;
    j["B"] = c.b;
    j["C"] = c.c;
  }
  return j.dump(2);
}

}  // namespace lqt
