#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string output;
};

Outcome run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "gfc_cli_test.log";
  const std::string cmd = std::string(GFC_BENCH_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gfc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << body;
  return p;
}

std::string manifest_value(const fs::path& p, const std::string& key) {
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + " = ", 0) == 0) return line.substr(key.size() + 3);
  return {};
}

}  // namespace

TEST_CASE("equilibrate prints the lattice constant") {
  const auto dir = scratch("eq");
  const auto r = run("equilibrate --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(r.output.find("a* = 1.3296055293") != std::string::npos);
  CHECK(fs::exists(dir / "equilibrate_manifest.txt"));
  CHECK(fs::exists(dir / "equilibrate_config.json"));
}

TEST_CASE("hard errors exit with 1 and name the problem") {
  const auto dir = scratch("bad");
  auto r = run("run --config " + write_config(dir, R"({"schema_version": 1, "radii": {"r00": [1]}})").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("radii.r00") != std::string::npos);
  r = run("run --config " + write_config(dir, R"({"schema_version": 1, "run": {"r0": -2}})").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("run.r0") != std::string::npos);
  r = run("frobnicate");
  CHECK(r.code == 1);
}

TEST_CASE("vacancy ATM run converges and replays byte for byte") {
  const auto dir = scratch("run");
  const auto cfg = write_config(dir, R"({"schema_version": 1,
    "run": {"model": "ATM", "r0": 2},
    "radii": {"r0": [2], "domain_ratio": 4},
    "reference": {"enabled": false}})");
  const auto out1 = dir / "first";
  auto r = run("run --deterministic --config " + cfg.string() + " --out " + out1.string());
  REQUIRE(r.code == 0);
  CHECK(manifest_value(out1 / "run_manifest.txt", "run.converged") == "true");
  for (const char* f : {"run.csv", "run.xyz", "run.gp", "run_config.json"}) CHECK(fs::exists(out1 / f));

  // Replay from the resolved config the first run recorded.
  const auto out2 = dir / "second";
  r = run("run --deterministic --config " + (out1 / "run_config.json").string() + " --out " + out2.string());
  REQUIRE(r.code == 0);
  CHECK(slurp(out1 / "run.csv") == slurp(out2 / "run.csv"));
  CHECK(slurp(out1 / "run.xyz") == slurp(out2 / "run.xyz"));
}

TEST_CASE("an unconverged run is a partial result") {
  const auto dir = scratch("partial");
  const auto cfg = write_config(dir, R"({"schema_version": 1,
    "run": {"model": "BGFC", "r0": 2},
    "reference": {"enabled": false},
    "solver": {"max_iterations": 2}})");
  const auto r = run("run --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.code == 2);
  CHECK(manifest_value(dir / "run_manifest.txt", "run.converged") == "false");
}

TEST_CASE("export writes fields, mesh and trace") {
  const auto dir = scratch("export");
  const auto cfg = write_config(dir, R"({"schema_version": 1, "run": {"model": "BQCF", "r0": 2}})");
  const auto r = run("export --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.code == 0);
  for (const char* f : {"export.xyz", "export_mesh.txt", "export_trace.csv", "export_trace.gp", "export_manifest.txt"})
    CHECK(fs::exists(dir / f));
}
