#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "soliton/runner.hpp"

using namespace soliton;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("soliton_runner_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& text, const fs::path& out, std::string* log = nullptr) {
  std::ostringstream os;
  RunOptions opt;
  opt.out_dir = out.string();
  int rc = run_manifest_text(text, "m.json", opt, os);
  if (log) *log = os.str();
  return rc;
}

}  // namespace

TEST_CASE("radial manifest passes and records the seed") {
  auto out = scratch("radial");
  CHECK(run(R"({"command": "radial", "n": 2, "r_max": 10, "seed": 42})", out) == kExitPass);
  CHECK(fs::exists(out / "summary.json"));
  CHECK(slurp(out / "profile.csv").rfind("# seed=42\n", 0) == 0);
  CHECK(slurp(out / "summary.json").find("\"seed\": 42") != std::string::npos);
}

TEST_CASE("reruns are byte-identical") {
  auto a = scratch("rerun_a"), b = scratch("rerun_b");
  std::string m = R"({"command": "dirichlet", "domain": "disk", "R": 1, "c": 1, "solver": {"h": 0.125}})";
  REQUIRE(run(m, a) == kExitPass);
  REQUIRE(run(m, b) == kExitPass);
  for (const char* f : {"summary.json", "field.csv", "domain.csv", "domain.json"}) CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("schema errors name the field and line") {
  auto out = scratch("schema");
  std::string log;
  CHECK(run("{\n  \"command\": \"radial\",\n  \"n\": 2.5\n}", out, &log) == kExitUsage);
  CHECK(log.find("m.json:3: field 'n'") != std::string::npos);
  CHECK(fs::exists(out / "summary.json"));

  CHECK(run(R"({"command": "radial", "nn": 2})", out, &log) == kExitUsage);
  CHECK(log.find("field 'nn': unknown key") != std::string::npos);

  CHECK(run(R"({"command": "dirichlet", "domain": "disk", "R": 1, "solver": {"hh": 1}})", out, &log) == kExitUsage);
  CHECK(log.find("field 'solver.hh'") != std::string::npos);

  CHECK(run(R"({"command": "teleport"})", out, &log) == kExitUsage);
  CHECK(run("{\"command\": ", out, &log) == kExitUsage);
  CHECK(log.find("invalid JSON") != std::string::npos);
}

TEST_CASE("numerical failures exit with 1") {
  auto out = scratch("numerical");
  std::string log;
  // too few nodes allowed
  CHECK(run(R"({"command": "dirichlet", "domain": "disk", "R": 1, "solver": {"h": 0.0625, "max_nodes": 10}})", out, &log) ==
        kExitNumerical);
  CHECK(log.find("[solve]") != std::string::npos);
}

TEST_CASE("array manifests run every entry") {
  auto out = scratch("array");
  std::ostringstream os;
  RunOptions opt;
  opt.out_dir = out.string();
  opt.jobs = 2;
  int rc = run_manifest_text(R"([{"command": "barrier", "K": [1, -1], "n": [2]},
                                  {"command": "radial", "n": 0}])",
                             "m.json", opt, os);
  CHECK(rc == kExitUsage);
  CHECK(fs::exists(out / "entry_0" / "barrier_residuals.csv"));
  CHECK(fs::exists(out / "entry_1" / "summary.json"));
  CHECK(slurp(out / "summary.json").find("\"exit_code\": 2") != std::string::npos);
}

TEST_CASE("missing manifest file") {
  std::ostringstream os;
  CHECK(run_manifest_file("/nonexistent/m.json", {}, os) == kExitUsage);
}
