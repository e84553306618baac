// Acceptance run: one PASS/FAIL line per criterion.
// usage: acceptance <configs dir> <scratch dir>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "olab/compare.hpp"
#include "olab/config.hpp"
#include "olab/error.hpp"
#include "olab/fbanalysis.hpp"
#include "olab/operators.hpp"
#include "olab/oracle.hpp"
#include "olab/problem.hpp"
#include "olab/run.hpp"
#include "olab/solver.hpp"

using namespace olab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kShipped{"1d_tangent", "1d_double_contact", "1d_linear_nocontact",
                                        "2d_radial",  "2d_general",        "2d_double_obstacle"};

fs::path configs, work;
int failures = 0;

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

// Runs the check; any exception is a failure carrying its message.
void criterion(int id, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail += std::string(" exception: ") + e.what();
  }
  report(id, pass, detail);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("missing " + p.string());
  return json::parse(in);
}

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunConfig shipped(const std::string& name) { return load_config(configs / (name + ".json")); }

double max_diff(const ScalarField& a, const ScalarField& b) {
  double d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

// Shipped runs shared by several criteria.
fs::path run_dir(const std::string& set, const std::string& name) { return work / set / name; }

void run_shipped(const std::string& set, int scale = 1, const std::vector<std::string>& names = kShipped) {
  for (const std::string& n : names) {
    RunOverrides ov;
    ov.output_dir = run_dir(set, n);
    ov.grid_scale = scale;
    fs::remove_all(*ov.output_dir);
    fs::create_directories(*ov.output_dir);
    try {
      const RunOutcome r = run_solve(shipped(n), ov);
      if (r.exit_code != kExitOk) {
        std::string f;
        for (const auto& d : r.failed_diagnostics) f += " " + d;
        std::printf("note: %s (scale %d) exited %d%s\n", n.c_str(), scale, r.exit_code, f.c_str());
      }
    } catch (const std::exception& e) {
      std::printf("note: %s (scale %d) raised: %s\n", n.c_str(), scale, e.what());
    }
  }
}

bool decreasing_with_inversions(const json& seq, int max_inv, double tol, int& inversions) {
  inversions = 0;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const double a = seq[i - 1]["value"], b = seq[i]["value"];
    if (b > a) {
      ++inversions;
      if (b > a * (1 + tol)) return false;
    }
  }
  return inversions <= max_inv;
}

// C1: per-stage gap to the active-set oracle on the 1D tangent problem.
bool c1(std::string& d) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = shipped("1d_tangent");
  const ProblemSpec P = build_problem(cfg);
  const std::vector<double> sched = build_schedule(cfg, P.grid());
  const PdasResult pd = solve_pdas(P);
  const double h = P.grid().h(0), floor = 5 * h * h;
  ScalarField u = P.phi1();
  bool ok = P.grid().size() == 513;
  double prev = INFINITY;
  std::ostringstream s;
  s << "gaps";
  for (double eps : sched) {
    u = solve_penalized(P, eps, u, cfg.solver.penalty).u;
    const double gap = max_diff(u, pd.u);
    ok = ok && gap <= 5 * eps + floor;
    ok = ok && (gap < prev || gap <= floor);
    prev = gap;
    s << " " << fmt("%.2e", gap) << "/" << fmt("%.2e", 5 * eps + floor);
  }
  const double t = seconds(t0);
  ok = ok && t < 5.0;
  d = s.str() + fmt(", %.2f s", t);
  return ok;
}

// C2 and C4 share the per-config solves.
struct InitResult {
  double rel = 0;
  double max_term_ratio = 0;
  std::int64_t checks = 0;
};

InitResult init_probe(const std::string& name) {
  const RunConfig cfg = shipped(name);
  ProblemSpec P = build_problem(cfg);
  if (cfg.solver.reduce) P = reduce_problem(P);
  const std::vector<double> s = build_schedule(cfg, P.grid());
  PenaltyParams lo = cfg.solver.penalty, up = cfg.solver.penalty;
  lo.init = InitKind::Lower;
  up.init = InitKind::Upper;
  const SolveResult a = solve_double_obstacle(P, s, lo);
  const SolveResult b = solve_double_obstacle(P, s, up);
  InitResult r;
  r.rel = max_diff(a.u, b.u) / std::max(1.0, P.scale());
  for (const SolveResult* x : {&a, &b})
    for (const StageRecord& st : x->eps_history) {
      r.max_term_ratio = std::max(r.max_term_ratio, st.max_penalty_term / x->penalty_bound);
      r.checks += st.penalty_checks;
    }
  return r;
}

std::vector<InitResult> probes;

bool c2(std::string& d) {
  bool ok = true;
  for (const std::string& n : kShipped) {
    probes.push_back(init_probe(n));
    ok = ok && probes.back().rel <= 1e-8;
    d += n + fmt(" %.1e  ", probes.back().rel);
  }
  return ok;
}

bool c3(std::string& d) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = shipped("2d_general");
  const ProblemSpec P = build_problem(cfg);
  const std::vector<double> s = build_schedule(cfg, P.grid());
  const SolveResult gen = solve_double_obstacle(P, s, cfg.solver.penalty);
  const SolveResult red = solve_double_obstacle(reduce_problem(P), s, cfg.solver.penalty);
  double diff = 0;
  for (std::size_t k = 0; k < gen.u.size(); ++k) diff = std::max(diff, std::abs(gen.u[k] - (red.u[k] + P.phi1()[k])));
  const double rel = diff / std::max(1.0, P.scale());
  const double t = seconds(t0);
  const bool fine = P.grid().dim() == 2 && P.grid().count(0) == 129 && P.grid().count(1) == 129;
  d = fmt("max diff %.2e scale", rel) + fmt(", %.1f s", t);
  return fine && rel <= 1e-8 && t < 60;
}

bool c4(std::string& d) {
  bool ok = !probes.empty();
  double worst = 0;
  std::int64_t checks = 0;
  for (const InitResult& r : probes) {
    worst = std::max(worst, r.max_term_ratio);
    checks += r.checks;
    ok = ok && r.checks > 0;
  }
  // The shipped runs assert the bound too: a violation aborts with InvariantError.
  for (const std::string& n : kShipped) {
    const json rep = read_json(run_dir("a", n) / "solve_report.json");
    for (const json& st : rep["stages"]) {
      worst = std::max(worst, st["max_penalty_term"].get<double>() / rep["penalty_bound"].get<double>());
      checks += st["penalty_checks"].get<std::int64_t>();
      ok = ok && st["penalty_checks"].get<std::int64_t>() > 0;
    }
  }
  d = fmt("max |beta term| / B = %.3f", worst) + " over " + std::to_string(checks) + " asserted iterates";
  return ok && worst <= 2.0;
}

bool c5(std::string& d) {
  const json g1 = read_json(run_dir("a", "2d_radial") / "growth.json")["result"];
  const json g2 = read_json(run_dir("fine", "2d_radial") / "growth.json")["result"];
  bool ok = true;
  for (const json* g : {&g1, &g2}) {
    ok = ok && (*g)["points_tested"].get<int>() > 0 && (*g)["points_skipped"].get<int>() == 0;
    for (const json& p : (*g)["points"]) {
      ok = ok && std::isfinite(p["c0_estimate"].get<double>()) && p["spread"].get<double>() < 0.5;
      const json& r = (*g)["radii"];
      const double h = 1.0 / ((g == &g1) ? 64.0 : 128.0);
      ok = ok && r.front().get<double>() >= 4 * h * (1 - 1e-12) && r.back().get<double>() <= 0.125 + 1e-12;
    }
  }
  const double a = g1["c0_estimate"], b = g2["c0_estimate"];
  const double rel = std::abs(b - a) / a;
  d = fmt("c0 %.4f (129)", a) + fmt(" vs %.4f (257)", b) + fmt(", change %.1f%%", 100 * rel) +
      fmt(", spread %.3f", std::max(g1["max_spread"].get<double>(), g2["max_spread"].get<double>())) + ", " +
      std::to_string(g1["points_tested"].get<int>()) + "+" + std::to_string(g2["points_tested"].get<int>()) +
      " points";
  return ok && rel < 0.2;
}

bool c6(std::string& d) {
  bool ok = true;
  int n = 0;
  std::int64_t checks = 0, fails = 0;
  for (const std::string& name : kShipped) {
    const fs::path p = run_dir("a", name) / "nondegeneracy.json";
    if (!fs::exists(p)) continue;
    const json r = read_json(p)["result"];
    ++n;
    checks += r["checks"].get<std::int64_t>();
    fails += r["failure_count"].get<std::int64_t>();
    ok = ok && r["checks"].get<std::int64_t>() > 0;
  }
  d = std::to_string(fails) + " failures in " + std::to_string(checks) + " checks over " + std::to_string(n) +
      " problems";
  return ok && n >= 4 && fails == 0;
}

ScalarField halfspace(const Grid& g, double c, const Point& nu) {
  return ScalarField::sample(g, [&](const Point& p) {
    const double t = std::max(0.0, p[0] * nu[0] + p[1] * nu[1]);
    return 0.5 * c * t * t;
  });
}

bool c7(std::string& d) {
  const json b = read_json(run_dir("a", "2d_double_obstacle") / "blowup.json")["result"];
  const double c = b["c"], src = b["source_scale"];
  const double res = b["fits"].back()["u"]["residual"];
  bool ok = b["verdict"] == "halfspace" && res <= 0.05 && std::abs(c / src - 1) <= 0.1;
  d = fmt("fixture c %.5f", c) + fmt(" vs %.5f", src) + fmt(", residual %.4f", res) +
      (b["in_gamma_d"].get<bool>() ? " (in gamma_d)" : " (not in gamma_d)");

  // Exact fields: u = (1/2)(x.nu)+^2 under psi = (a/2)(x.nu)+^2, and u = psi.
  const std::vector<double> lo{-1, -1}, hi{1, 1};
  const std::vector<int> cnt{129, 129};
  const Grid g = Grid::build(lo, hi, cnt);
  const std::size_t o = g.flat(Index{64, 64, 0});
  const double a = 3.0;
  double worst = 0;
  const std::vector<std::pair<Point, std::vector<double>>> cases{
      {Point{0, 1, 0}, {0.5, 0.25, 0.125}},
      {Point{-1, 0, 0}, {0.5, 0.25, 0.125}},
      {Point{0, -1, 0}, {0.5, 0.25, 0.125}},
      {Point{0.6, 0.8, 0}, {0.5, 0.25, 0.125}}};
  for (const auto& [nu, rhos] : cases) {
    const BlowupReport s = classify_blowup(halfspace(g, 1.0, nu), halfspace(g, a, nu), o, rhos);
    const BlowupReport t = classify_blowup(halfspace(g, a, nu), halfspace(g, a, nu), o, rhos);
    ok = ok && s.verdict == BlowupVerdict::Halfspace && t.verdict == BlowupVerdict::Halfspace;
    worst = std::max({worst, std::abs(s.c - 1.0), std::abs(t.c - a)});
  }
  d += fmt("; synthetic |c - {1, a}| <= %.1e", worst);
  return ok && worst <= 1e-6;
}

bool c8(std::string& d) {
  const json m = read_json(run_dir("a", "2d_radial") / "monotonicity.json")["result"];
  const json rep = read_json(run_dir("a", "2d_radial") / "solve_report.json");
  const double h = rep["grid"]["h"][0], scale = rep["scale"];
  const double bound = -5 * h * scale;
  bool ok = m["checks"].size() >= 3;
  std::vector<double> deltas;
  double worst = INFINITY;
  for (const json& c : m["checks"]) {
    ok = ok && c["min_directional_derivative"].get<double>() >= bound && c["nodes_tested"].get<int>() > 0;
    worst = std::min(worst, c["min_directional_derivative"].get<double>());
    deltas.push_back(c["delta"]);
  }
  for (double want : {0.25, 0.5, 1.0}) ok = ok && std::count(deltas.begin(), deltas.end(), want) >= 2;
  d = fmt("min directional derivative %.2e", worst) + fmt(" >= %.2e", bound) + " over " +
      std::to_string(m["checks"].size()) + " (delta, ball) pairs";
  return ok;
}

bool c9(std::string& d) {
  bool ok = true;
  for (const char* set : {"a", "fine"}) {
    const json r = read_json(run_dir(set, "2d_radial") / "fbgraph.json")["result"];
    int inv = 0;
    const bool mono = decreasing_with_inversions(r["normal_variation"], 1, 0.1, inv);
    ok = ok && mono && r["normal_variation"].size() >= 3;
    d += std::string(set[0] == 'a' ? "129:" : " 257:");
    for (const json& v : r["normal_variation"]) d += fmt(" %.3f", v["value"].get<double>());
    d += " (" + std::to_string(inv) + " inversions)";
  }
  return ok;
}

bool c10(std::string& d) {
  bool ok = true;
  int n = 0;
  for (const std::string& name : kShipped) {
    const RunConfig cfg = shipped(name);
    const OperatorSpec op = build_operator(cfg.op, static_cast<int>(cfg.counts.size()), cfg.constants);
    const EllipticityReport e = verify_ellipticity(op, 10000, 1000 + n);
    const HolderReport hr = verify_holder_x(op, 10000, 2000 + n);
    ok = ok && e.samples_tested == 10000 && e.violation_count == 0 && hr.pass;
    ++n;
  }
  const OperatorSpec bad = OperatorSpec::pucci_plus(2, 1, 2).with_ellipticity(1.5, 2);
  const EllipticityReport v = verify_ellipticity(bad, 10000, 5);
  d = std::to_string(n) + " operators clean; overstated lambda0 flagged " + std::to_string(v.violation_count) +
      " times";
  return ok && v.violation_count > 0;
}

bool c11(std::string& d) {
  bool ok = true;
  for (const std::string& name : kShipped) {
    RunConfig cfg = shipped(name);
    // 2D studies start from 33^2 so the finest level is the shipped 129^2.
    if (cfg.counts.size() == 2) cfg.counts = {33, 33};
    cfg.output_dir = work / "convergence" / name;
    fs::remove_all(cfg.output_dir);
    fs::create_directories(cfg.output_dir);
    const RunOutcome r = run_convergence(cfg, {}, 0.10);
    const json c = read_json(cfg.output_dir / "convergence.json");
    const bool pass = r.exit_code == kExitOk && c["pass"].get<bool>();
    ok = ok && pass;
    d += name + ":";
    for (const json& l : c["levels"]) d += fmt(" %.3f", l["max_second_difference"].get<double>());
    if (!pass) {
      d += " (growth";
      for (const json& gr : c["second_difference_growth"]) d += fmt(" %+.1f%%", 100 * gr.get<double>());
      d += ")";
    }
    d += "  ";
  }
  return ok;
}

bool c12(std::string& d) {
  std::size_t files = 0;
  bool ok = true;
  for (const std::string& n : kShipped) {
    const CompareResult r = compare_runs(run_dir("a", n), run_dir("b", n));
    files += r.identical.size();
    ok = ok && r.pass && r.differing.empty() && r.missing.empty() && !r.identical.empty();
    if (!r.differing.empty()) d += n + " differs in " + r.differing.front() + "; ";
  }
  d += std::to_string(files) + " artifacts byte-identical across reruns";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <configs dir> <scratch dir>\n");
    return 2;
  }
  configs = argv[1];
  work = argv[2];
  fs::create_directories(work);

  run_shipped("a");
  run_shipped("b");
  run_shipped("fine", 2, {"2d_radial"});

  criterion(1, c1);
  criterion(2, c2);
  criterion(3, c3);
  criterion(4, c4);
  criterion(5, c5);
  criterion(6, c6);
  criterion(7, c7);
  criterion(8, c8);
  criterion(9, c9);
  criterion(10, c10);
  criterion(11, c11);
  criterion(12, c12);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
