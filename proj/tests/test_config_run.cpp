#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "olab/compare.hpp"
#include "olab/config.hpp"
#include "olab/error.hpp"
#include "olab/expr.hpp"
#include "olab/field_io.hpp"
#include "olab/run.hpp"

using namespace olab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("olab_test_run_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const fs::path kConfigs = OLAB_CONFIG_DIR;

const char* kTiny = R"({
  "name": "tiny",
  "problem": {
    "grid": {"lo": [-1], "hi": [1], "counts": [65]},
    "operator": {"kind": "laplacian"},
    "phi1": "0.5 - 2*x^2",
    "phi2": 1,
    "g": 0
  },
  "analysis": {"set_tol_factor": 1},
  "diagnostics": ["complementarity", {"name": "growth", "at": [0.134], "r_max": 0.25}]
})";

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("expression grammar") {
  const std::map<std::string, double> k{{"R0", 0.5}};
  CHECK(Expression::parse("1 + 2*3 - 4/2").eval(Point{}) == 5.0);
  CHECK(Expression::parse("-2^2").eval(Point{}) == -4.0);
  CHECK(Expression::parse("2^3^2").eval(Point{}) == 512.0);
  CHECK(Expression::parse("max(x, y, -1) + pos(-3) + abs(-2)", k).eval(Point{0.25, 0.5, 0}) == 2.5);
  CHECK(Expression::parse("R0*z", k).eval(Point{0, 0, 4}) == 2.0);
  CHECK(Expression::parse("x1 + x3").variables() == 5u);
  CHECK(Expression::parse("sqrt(4) + log(exp(1)) + cos(0) + sin(0) + min(3, pi)").eval(Point{}) == 7.0);
  CHECK_THROWS_WITH_AS(Expression::parse("1 + system(2)"), doctest::Contains("column"), ValidationError);
  CHECK_THROWS_AS(Expression::parse("1 +"), ValidationError);
  CHECK_THROWS_AS(Expression::parse("(1"), ValidationError);
  CHECK_THROWS_AS(Expression::parse("q"), ValidationError);
  CHECK_THROWS_AS(Expression::parse("sqrt(1, 2)"), ValidationError);
}

TEST_CASE("config errors carry line and field") {
  std::string t = kTiny;
  t.replace(t.find("[65]"), 4, "[2]");
  const std::string e = error_of(t);
  CHECK(e.find("cfg.json:4") != std::string::npos);
  CHECK(e.find("problem.grid.counts") != std::string::npos);
  CHECK(e.find("counts must be >= 3") != std::string::npos);

  std::string u = kTiny;
  u.replace(u.find("\"complementarity\""), 17, "\"curvature\"");
  const std::string eu = error_of(u);
  CHECK(eu.find("unknown diagnostic") != std::string::npos);
  for (const char* n : kDiagnosticNames) CHECK(eu.find(n) != std::string::npos);

  std::string k = kTiny;
  k.replace(k.find("\"phi2\""), 6, "\"phi3\"");
  CHECK(error_of(k).find("phi3") != std::string::npos);

  std::string x = kTiny;
  x.replace(x.find("0.5 - 2*x^2"), 11, "0.5 - 2*@");
  const std::string ex = error_of(x);
  CHECK(ex.find("problem.phi1") != std::string::npos);

  CHECK(error_of("{ \"name\": 1,, }").find("cfg.json:1") != std::string::npos);

  std::string s = kTiny;
  s.replace(s.find("\"analysis\""), 0, "\"solver\": {\"schedule\": [0.01, 0.02]},\n  ");
  CHECK(error_of(s).find("solver.schedule") != std::string::npos);

  std::string d = kTiny;
  d.replace(d.find("\"complementarity\""), 17, "\"growth\"");
  CHECK(error_of(d).find("listed twice") != std::string::npos);
}

TEST_CASE("field files referenced by a config must exist") {
  const fs::path dir = scratch("files");
  std::string t = kTiny;
  t.replace(t.find("\"phi2\": 1"), 9, "\"phi2\": {\"file\": \"upper\"}");
  {
    std::ofstream(dir / "c.json") << t;
  }
  const RunConfig cfg = load_config(dir / "c.json");
  CHECK_THROWS_AS(build_problem(cfg), ValidationError);
  save_field(ScalarField::constant(config_grid(cfg), 1.0), dir / "upper");
  CHECK(build_problem(cfg).phi2()[3] == 1.0);
}

TEST_CASE("grid scale refines so coarse nodes persist") {
  RunConfig cfg = parse_config(kTiny);
  apply_grid_scale(cfg, 4);
  CHECK(cfg.counts[0] == 257);
  CHECK(cfg.solver.stages == 8);
  const std::vector<double> s = build_schedule(cfg, config_grid(cfg));
  CHECK(s.back() == doctest::Approx(0.1 * std::pow(0.25, 7)));
  CHECK_THROWS_AS(apply_grid_scale(cfg, 0), ValidationError);

  RunConfig e = parse_config(kTiny);
  e.solver.schedule = {1e-2, 5e-3};
  apply_grid_scale(e, 2);
  CHECK(e.solver.schedule.size() == 4);
  CHECK(e.solver.schedule.back() == doctest::Approx(1.25e-3));
}

TEST_CASE("shipped configs parse and build") {
  for (const char* n : {"1d_tangent", "1d_double_contact", "1d_linear_nocontact", "2d_radial", "2d_general",
                        "2d_double_obstacle"}) {
    CAPTURE(n);
    const RunConfig cfg = load_config(kConfigs / (std::string(n) + ".json"));
    const ProblemSpec P = build_problem(cfg);
    CHECK(P.grid().size() > 0);
    CHECK(!build_schedule(cfg, P.grid()).empty());
  }
}

TEST_CASE("tangent config run writes the documented artifacts") {
  const fs::path out = scratch("tangent");
  RunOverrides ov;
  ov.output_dir = out;
  const RunOutcome r = run_solve(load_config(kConfigs / "1d_tangent.json"), ov);
  CHECK(r.exit_code == kExitOk);
  const json m = json::parse(read(out / "manifest.json"));
  std::vector<std::string> files;
  for (const json& a : m["artifacts"]) files.push_back(a["file"]);
  for (const char* f : {"solution.json", "solution.bin", "solution.csv", "solve_report.json", "complementarity.json",
                        "fbgraph.json", "fbgraph.csv", "growth.csv"})
    CHECK(std::find(files.begin(), files.end(), f) != files.end());
  CHECK(m["config_sha256"] == sha256_hex(read(kConfigs / "1d_tangent.json")));
  CHECK(m["version"] == kVersion);
  CHECK(m.contains("wall_time_seconds"));
  for (const json& a : m["artifacts"]) CHECK(a["sha256"] == sha256_file(out / a["file"].get<std::string>()));

  const json rep = json::parse(read(out / "solve_report.json"));
  CHECK(rep["converged"] == true);
  CHECK(rep["status"] == "ok");
  CHECK(rep["stages"].size() == 6);
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("divergence keeps partial artifacts and exits 3") {
  const fs::path out = scratch("diverge");
  RunConfig cfg = parse_config(kTiny);
  cfg.solver.penalty.max_newton = 1;
  cfg.solver.schedule = {1e-2, 1e-5};
  cfg.output_dir = out;
  const RunOutcome r = run_solve(cfg);
  CHECK(r.exit_code == kExitDivergence);
  CHECK(r.status == "diverged");
  CHECK(fs::exists(out / "solution.bin"));
  CHECK(fs::exists(out / "manifest.json"));
  const json rep = json::parse(read(out / "solve_report.json"));
  CHECK(rep["status"] == "diverged");
  CHECK(!fs::exists(out / "growth.json"));
}

TEST_CASE("failing diagnostics exit 4 and name themselves") {
  const fs::path out = scratch("diagfail");
  std::string t = kTiny;
  t.replace(t.find("\"r_max\": 0.25"), 13, "\"r_max\": 0.25, \"max_spread\": 1e-6");
  RunConfig cfg = parse_config(t);
  cfg.output_dir = out;
  const RunOutcome r = run_solve(cfg);
  CHECK(r.exit_code == kExitDiagnosticFailure);
  REQUIRE(r.failed_diagnostics.size() == 1);
  CHECK(r.failed_diagnostics[0] == "growth");
  const json g = json::parse(read(out / "growth.json"));
  CHECK(g["pass"] == false);
}

TEST_CASE("diagnostic parameters are validated") {
  const fs::path out = scratch("diagparam");
  std::string t = kTiny;
  t.replace(t.find("\"r_max\": 0.25"), 13, "\"r_max\": 0.25, \"radius\": 3");
  RunConfig cfg = parse_config(t, "cfg.json");
  cfg.output_dir = out;
  CHECK_THROWS_WITH_AS(run_solve(cfg), doctest::Contains("radius"), ValidationError);
}

TEST_CASE("diagnose reruns on the stored solution") {
  const fs::path out = scratch("diagnose");
  RunConfig cfg = parse_config(kTiny);
  cfg.output_dir = out;
  CHECK(run_solve(cfg).exit_code == kExitOk);
  const std::string before = read(out / "growth.json");
  fs::remove(out / "growth.json");
  const RunOutcome r = run_diagnose(cfg);
  CHECK(r.exit_code == kExitOk);
  CHECK(read(out / "growth.json") == before);
}

TEST_CASE("compare: identical runs, seeds, grid mismatch, solvers") {
  const fs::path a = scratch("cmp_a"), b = scratch("cmp_b"), c = scratch("cmp_c"), d = scratch("cmp_d"),
                 e = scratch("cmp_e");
  const RunConfig cfg = load_config(kConfigs / "1d_tangent.json");
  RunOverrides ov;
  ov.output_dir = a;
  run_solve(cfg, ov);
  ov.output_dir = b;
  run_solve(cfg, ov);
  const CompareResult same = compare_runs(a, b);
  CHECK(same.pass);
  CHECK(same.differing.empty());
  for (const FieldDiff& f : same.fields) {
    CHECK(f.max_abs == 0.0);
    CHECK(f.l2 == 0.0);
  }

  ov.output_dir = c;
  ov.seed = 99;
  run_solve(cfg, ov);
  const CompareResult seeded = compare_runs(a, c);
  for (const FieldDiff& f : seeded.fields) CHECK(f.max_abs == 0.0);
  CHECK(std::find(seeded.identical.begin(), seeded.identical.end(), "solution.bin") != seeded.identical.end());

  ov.output_dir = d;
  ov.seed.reset();
  ov.grid_scale = 2;
  run_solve(cfg, ov);
  CHECK_THROWS_AS(compare_runs(a, d), ValidationError);

  ov.output_dir = e;
  ov.grid_scale = 1;
  ov.solver = SolverKind::Pdas;
  run_solve(cfg, ov);
  const CompareResult solvers = compare_runs(a, e);
  const double eps_final = build_schedule(cfg, config_grid(cfg)).back();
  REQUIRE(!solvers.fields.empty());
  CHECK(solvers.fields[0].max_abs <= 2 * eps_final);
  CHECK(solvers.fields[0].max_abs > 0);
  CHECK_FALSE(solvers.pass);
}

TEST_CASE("convergence study over three levels") {
  const fs::path out = scratch("conv");
  RunConfig cfg = load_config(kConfigs / "1d_tangent.json");
  cfg.diagnostics.clear();
  cfg.counts = {129};
  cfg.output_dir = out;
  const RunOutcome r = run_convergence(cfg);
  const json c = json::parse(read(out / "convergence.json"));
  CHECK(c["levels"].size() == 3);
  CHECK(c["levels"][2]["counts"][0] == 513);
  CHECK(c["e12"].get<double>() > c["e24"].get<double>());
  CHECK(r.exit_code == (c["pass"].get<bool>() ? kExitOk : kExitDiagnosticFailure));
  CHECK(fs::exists(out / "level_4" / "solution.bin"));
}
