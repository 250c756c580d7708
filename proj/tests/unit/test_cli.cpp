// Runs the lqt binary end to end and checks exit codes and outputs.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lqt_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(LQT_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_config(const fs::path& dir, const std::string& json) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << json;
  return p;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Cli, StationaryScalar) {
  const auto dir = scratch("stationary");
  const auto r = run("stationary --scenario scalar --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string csv = read(dir / "stationary.csv");
  EXPECT_NE(csv.find("x_bar,0,0.5\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("y_bar,0,-0.5\n"), std::string::npos) << csv;
  const auto manifest = nlohmann::json::parse(read(dir / "manifest.json"));
  EXPECT_EQ(manifest["command"], "stationary");
  EXPECT_EQ(manifest["exit_code"], 0);
  for (const auto& f : manifest["outputs"]) EXPECT_TRUE(fs::exists(dir / f.get<std::string>())) << f;
  EXPECT_TRUE(manifest["timings_seconds"].contains("solve"));
}

TEST(Cli, StationaryZeroTarget) {
  const auto dir = scratch("stationary_zero");
  const auto cfg = write_config(dir, R"({"scenario": "scalar", "target": "zero"})");
  const auto r = run("stationary --config " + cfg.string() + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string csv = read(dir / "stationary.csv");
  EXPECT_NE(csv.find("x_bar,0,0\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("u_bar,0,0\n"), std::string::npos) << csv;
}

TEST(Cli, RankDeficientIsInputError) {
  const auto dir = scratch("rank");
  const auto cfg = write_config(dir, R"({"scenario": "custom", "A": [[0]], "B": [[0]], "C": [[1]]})");
  const auto r = run("stationary --config " + cfg.string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("uniqueness failure"), std::string::npos) << r.out;
}

TEST(Cli, InputErrors) {
  const auto dir = scratch("input");
  EXPECT_EQ(run("stationary --config " + (dir / "missing.json").string()).code, 2);
  const auto bad_key = write_config(dir, R"({"scenario": "scalar", "horizon": 3})");
  const auto r = run("turnpike --config " + bad_key.string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("unknown config key"), std::string::npos) << r.out;
  EXPECT_EQ(run("turnpike --scenario scalar --dt 0.3 --T 1 --out " + dir.string()).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("solve").code, 2);  // neither --config nor --scenario
  EXPECT_EQ(run("verify medium").code, 2);
}

TEST(Cli, InternalErrorExitCode) {
  const auto dir = scratch("internal");
  const auto r = run("verify quick --inject-fault internal-error --out " + dir.string());
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("internal error"), std::string::npos) << r.out;
}

TEST(Cli, TurnpikeScalarThreeHorizons) {
  const auto dir = scratch("turnpike");
  const auto cfg = write_config(dir, R"({"scenario": "scalar", "horizons": [5, 10, 20]})");
  const auto r = run("turnpike --config " + cfg.string() + " --jobs 3 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string summary = read(dir / "turnpike_summary.csv");
  EXPECT_EQ(count_lines(summary), 4) << summary;
  std::istringstream in(summary);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) EXPECT_EQ(line.substr(line.rfind(',') + 1), "true") << line;
  EXPECT_TRUE(fs::exists(dir / "turnpike_report.csv"));
}

TEST(Cli, TurnpikeAtSteadyStateTriviallyPasses) {
  const auto dir = scratch("steady");
  const auto cfg =
      write_config(dir, R"({"scenario": "scalar", "horizons": [5, 10], "target": "zero", "x0": "xbar"})");
  const auto r = run("turnpike --config " + cfg.string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, TurnpikeHeatFitsPositiveRate) {
  const auto dir = scratch("heat");
  const auto r = run("turnpike --scenario heat_1d --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream in(read(dir / "turnpike_summary.csv"));
  std::string line;
  std::getline(in, line);
  ASSERT_TRUE(std::getline(in, line));
  std::vector<std::string> cells;
  std::stringstream row(line);
  for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_GT(std::stod(cells[2]), 0.0) << line;
}

TEST(Cli, OutputDirFromEnvironment) {
  const auto dir = scratch("env");
  const auto r = run("riccati --scenario random_stable --T 5", "LQT_OUT_DIR=" + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "are.csv"));
  EXPECT_TRUE(fs::exists(dir / "dre.csv"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Cli, SolveAndYosida) {
  const auto dir = scratch("solve");
  auto r = run("solve --scenario scalar --T 2 --dt 0.01 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_lines(read(dir / "trajectory_T2.csv")), 1 + 201 * 3);
  r = run("yosida --scenario scalar --T 2 --dt 0.01 --jobs 2 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_lines(read(dir / "yosida_dynamic.csv")), 11);
  EXPECT_EQ(count_lines(read(dir / "yosida_stationary.csv")), 11);
}

TEST(Cli, VerifyFaultInjectionNamesCriterion) {
  const auto dir = scratch("fault");
  const auto r = run("verify quick --inject-fault corrupt-are --jobs 4 --out " + dir.string());
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("FAIL [ 1] scalar ARE"), std::string::npos) << r.out;
}

TEST(Cli, VerifyQuickTwiceIsByteIdentical) {
  const auto a = scratch("verify_a");
  const auto b = scratch("verify_b");
  const auto ra = run("verify quick --jobs 1 --out " + a.string());
  ASSERT_EQ(ra.code, 0) << ra.out;
  EXPECT_EQ(count_lines(ra.out), 13) << ra.out;
  const auto rb = run("verify quick --jobs 4 --out " + b.string());
  ASSERT_EQ(rb.code, 0) << rb.out;
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    const auto other = b / entry.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_TRUE(read(entry.path()) == read(other)) << entry.path().filename();
    ++compared;
  }
  EXPECT_EQ(compared, 7);
}
