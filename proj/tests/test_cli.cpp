#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

struct CmdResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd =
      std::string(KME_BINARY_DIR) + "/kmecov " + args + " 2>&1";
  std::array<char, 4096> buffer{};
  std::string output;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buffer.data(), buffer.size(), pipe)) output += buffer.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

std::string write_scenario(const std::string& name) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << R"({
    "name": "cli_box",
    "domain": {"type": "box", "bounds": [[-1.0, 1.0], [-1.0, 1.0]]},
    "target": {"type": "uniform"},
    "samples": 25,
    "embedding_kernel": {"family": "gaussian", "length_scale": 0.3},
    "objective_kernel": {"family": "gaussian", "length_scale": 0.3},
    "system": {"system": "single_integrator", "u_max": 1.0, "dt": 0.1,
               "sigma": "identity", "constrain_to_domain": true},
    "planner": "greedy",
    "steps": 12,
    "seeds": [7],
    "start": [0.0, 0.0]
  })";
  return path.string();
}

std::string temp_out(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("kme_cli_" + tag);
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("--help exits 0 on every subcommand") {
  CHECK(run_cli("--help").exit_code == 0);
  for (const char* sub : {"run", "suite", "sample-target", "export"}) {
    const CmdResult r = run_cli(std::string(sub) + " --help");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("--") != std::string::npos);
  }
  for (const char* sub : {"horizon", "kernels", "scaling", "coverage"}) {
    CHECK(run_cli(std::string("suite ") + sub + " --help").exit_code == 0);
  }
}

TEST_CASE("run writes outputs and exits 0") {
  const std::string scenario = write_scenario("cli_happy.json");
  const std::string out = temp_out("happy");
  const CmdResult r = run_cli("run --scenario " + scenario + " --out " + out);
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(out + "/cli_box/7/trace.csv"));
  CHECK(std::filesystem::exists(out + "/cli_box/7/summary.json"));
  CHECK(std::filesystem::exists(out + "/cli_box/manifest.json"));
}

TEST_CASE("seed flag overrides scenario seeds") {
  const std::string scenario = write_scenario("cli_seed.json");
  const std::string out = temp_out("seed");
  const CmdResult r =
      run_cli("run --scenario " + scenario + " --seed 99 --out " + out);
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(out + "/cli_box/99/trace.csv"));
  CHECK(!std::filesystem::exists(out + "/cli_box/7"));
}

TEST_CASE("missing scenario exits 1 and names the path") {
  const CmdResult r = run_cli("run --scenario /no/such/file.json");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("/no/such/file.json") != std::string::npos);
}

TEST_CASE("invalid override exits 1 and lists valid keys") {
  const std::string scenario = write_scenario("cli_override.json");
  const CmdResult r =
      run_cli("run --scenario " + scenario + " --set planner.mcp.horizon=60");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("valid keys") != std::string::npos);
}

TEST_CASE("override round-trips into the manifest") {
  const std::string scenario = write_scenario("cli_roundtrip.json");
  const std::string out = temp_out("roundtrip");
  const CmdResult r = run_cli(
      "run --scenario " + scenario +
      " --set planner={\\\"mpc\\\":{\\\"horizon\\\":60,\\\"iterations\\\":3,"
      "\\\"step_size\\\":1.0}} --out " + out);
  CHECK(r.exit_code == 0);
  std::ifstream in(out + "/cli_box/7/../manifest.json");
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"horizon\": 60") != std::string::npos);
}

TEST_CASE("json errors are machine readable") {
  const CmdResult r = run_cli("--json-errors run --scenario /no/such.json");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("{\"error\":") != std::string::npos);
  CHECK(r.output.find("\"kind\":\"validation\"") != std::string::npos);
}

TEST_CASE("sample-target exports one row per sample") {
  const std::string scenario = write_scenario("cli_samples.json");
  const std::string csv =
      (std::filesystem::temp_directory_path() / "kme_cli_samples.csv").string();
  const CmdResult r = run_cli("sample-target --scenario " + scenario +
                              " --seed 7 --out " + csv);
  CHECK(r.exit_code == 0);
  std::ifstream in(csv);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 26);  // header + 25 samples
}

TEST_CASE("export recomputes oracle metrics from a finished run") {
  const std::string scenario = write_scenario("cli_export.json");
  const std::string out = temp_out("export");
  REQUIRE(run_cli("run --scenario " + scenario + " --out " + out).exit_code == 0);
  const std::string csv =
      (std::filesystem::temp_directory_path() / "kme_cli_oracle.csv").string();
  const CmdResult r = run_cli("export --run " + out + "/cli_box/7 --points 5 --out " + csv);
  CHECK(r.exit_code == 0);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,emmd_oracle");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("runtime failures exit 2") {
  const auto path = std::filesystem::temp_directory_path() / "cli_badmesh.json";
  std::ofstream out(path);
  out << R"({
    "name": "badmesh",
    "domain": {"type": "mesh", "path": "/nonexistent/mesh.obj"},
    "target": {"type": "uniform"},
    "samples": 10,
    "embedding_kernel": {"family": "gaussian", "length_scale": 0.1},
    "objective_kernel": {"family": "gaussian", "length_scale": 0.1},
    "system": {"system": "single_integrator", "u_max": 0.05, "dt": 1.0, "sigma": "project"},
    "planner": "greedy",
    "steps": 5,
    "seeds": [1]
  })";
  out.close();
  const CmdResult r = run_cli("run --scenario " + path.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("/nonexistent/mesh.obj") != std::string::npos);
}

TEST_CASE("KMECOV_OUT sets the default output directory") {
  const std::string scenario = write_scenario("cli_env.json");
  const std::string out = temp_out("envdir");
  const std::string cmd = "KMECOV_OUT=" + out + " " + std::string(KME_BINARY_DIR) +
                          "/kmecov run --scenario " + scenario + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 1024> buffer{};
  while (fgets(buffer.data(), buffer.size(), pipe)) {
  }
  const int status = pclose(pipe);
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(std::filesystem::exists(out + "/cli_box/7/trace.csv"));
}
