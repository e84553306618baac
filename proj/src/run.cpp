#include "olab/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include "olab/discrete.hpp"
#include "olab/error.hpp"
#include "olab/field_io.hpp"

namespace olab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

RunConfig resolve_config(RunConfig cfg, const RunOverrides& ov) {
  if (ov.grid_scale != 1) apply_grid_scale(cfg, ov.grid_scale);
  if (ov.solver) cfg.solver.kind = *ov.solver;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (cfg.output_dir.empty()) throw ValidationError("no output directory: set output_dir in the config or pass --out");
  return cfg;
}

namespace {

json point_json(const Point& p, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

json grid_json(const Grid& g) {
  json h = json::array();
  for (int a = 0; a < g.dim(); ++a) h.push_back(g.h(a));
  return json{{"lo", g.lo_vector()}, {"hi", g.hi_vector()}, {"counts", g.count_vector()}, {"h", h}};
}

json complementarity_json(const ComplementarityReport& c) {
  return json{{"max_lower_violation", c.max_lower_violation},
              {"max_upper_violation", c.max_upper_violation},
              {"max_sign_violation_lower", c.max_sign_violation_lower},
              {"max_sign_violation_upper", c.max_sign_violation_upper},
              {"tol_active", c.tol_active}};
}

// Collects files written into the output directory, in write order.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }
  const fs::path& dir() const { return dir_; }
  void text(const std::string& name, const std::string& body) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    out << body;
    if (!out) throw Error("short write on " + (dir_ / name).string());
    add(name);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
  void field(const std::string& stem, const ScalarField& f, bool csv) {
    save_field(f, dir_ / stem);
    add(stem + ".json");
    add(stem + ".bin");
    if (csv) {
      write_field_csv(f, dir_ / (stem + ".csv"));
      add(stem + ".csv");
    }
  }
  void add(const std::string& name) {
    if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
  }
  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

constexpr std::size_t kCsvNodeLimit = 20000;

void write_manifest(ArtifactWriter& w, const RunConfig& cfg, const char* command, const RunOutcome& out,
                    double wall) {
  json arts = json::array();
  for (const std::string& n : w.names()) {
    const fs::path p = w.dir() / n;
    arts.push_back(json{{"file", n}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
  }
  json m{{"tool", "olab"},
         {"version", kVersion},
         {"command", command},
         {"name", cfg.name},
         {"config", cfg.source.empty() ? std::string() : cfg.source.string()},
         {"config_sha256", sha256_hex(cfg.text)},
         {"solver", to_string(cfg.solver.kind)},
         {"counts", cfg.counts},
         {"seed", cfg.seed},
         {"status", out.status},
         {"exit_code", out.exit_code},
         {"failed_diagnostics", out.failed_diagnostics},
         {"artifacts", arts},
         {"wall_time_seconds", wall}};
  std::ofstream f(w.dir() / "manifest.json", std::ios::binary);
  if (!f) throw Error("cannot write manifest");
  f << m.dump(2) << "\n";
}

struct SolveOutput {
  std::optional<ScalarField> u;
  json report;
  bool diverged = false;
  std::string message;
};

SolveOutput solve_problem(const RunConfig& cfg, const ProblemSpec& P) {
  SolveOutput out;
  const Grid& g = P.grid();
  json rep{{"name", cfg.name},
           {"form", cfg.form == ProblemForm::General ? "general" : "reduced"},
           {"solver", to_string(cfg.solver.kind)},
           {"reduce", cfg.solver.reduce},
           {"grid", grid_json(g)},
           {"operator", P.op().describe()},
           {"scale", P.scale()}};
  // With reduce, the solve runs on the reduced problem and phi1 is added back.
  const bool reduce = cfg.solver.reduce;
  std::optional<ProblemSpec> R;
  if (reduce) R.emplace(reduce_problem(P));
  const ProblemSpec& S = reduce ? *R : P;
  auto lift = [&](std::vector<double> v) {
    if (reduce)
      for (std::size_t k = 0; k < v.size(); ++k) v[k] += P.phi1()[k];
    return ScalarField(g, std::move(v));
  };

  if (cfg.solver.kind == SolverKind::Penalty) {
    const std::vector<double> schedule = build_schedule(cfg, g);
    rep["schedule"] = schedule;
    rep["penalty_bound"] = penalty_bound(S);
    try {
      SolveResult r = solve_double_obstacle(S, schedule, cfg.solver.penalty);
      json stages = json::array();
      for (const StageRecord& s : r.eps_history) {
        stages.push_back(json{{"eps", s.eps},
                              {"iterations", s.iterations},
                              {"residual", s.residual},
                              {"max_penalty_term", s.max_penalty_term},
                              {"penalty_checks", s.penalty_checks},
                              {"picard_steps", s.picard_steps},
                              {"lower_violation", s.lower_violation},
                              {"upper_violation", s.upper_violation}});
      }
      rep["stages"] = stages;
      rep["converged"] = r.converged;
      rep["factorizations"] = r.factorizations;
      out.u = lift({r.u.values().begin(), r.u.values().end()});
    } catch (const DivergenceError& e) {
      out.diverged = true;
      out.message = e.what();
      rep["converged"] = false;
      rep["diverged_at_eps"] = e.eps();
      rep["best_residual"] = e.residual();
      if (!e.best_iterate().empty()) out.u = lift(e.best_iterate());
    }
  } else {
    try {
      PdasResult r = solve_pdas(S, cfg.solver.pdas);
      json hist = json::array();
      for (auto [a, b] : r.history) hist.push_back(json::array({a, b}));
      rep["cycles"] = r.cycles;
      rep["newton_iterations"] = r.newton_iterations;
      rep["active_history"] = hist;
      rep["converged"] = true;
      out.u = lift({r.u.values().begin(), r.u.values().end()});
    } catch (const CyclingError& e) {
      out.diverged = true;
      out.message = e.what();
      json hist = json::array();
      for (auto [a, b] : e.history()) hist.push_back(json::array({a, b}));
      rep["converged"] = false;
      rep["active_history"] = hist;
    } catch (const DivergenceError& e) {
      out.diverged = true;
      out.message = e.what();
      rep["converged"] = false;
      if (!e.best_iterate().empty()) out.u = lift(e.best_iterate());
    }
  }
  if (out.u) {
    // Complementarity of the general-form problem, as posed.
    const double eps_final = cfg.solver.kind == SolverKind::Penalty ? build_schedule(cfg, g).back() : 0.0;
    double tol_active = cfg.solver.penalty.tol_active > 0.0 ? cfg.solver.penalty.tol_active : default_tol_active(P);
    tol_active = std::max(tol_active, 2.0 * eps_final);
    const ComplementarityReport c = residual_report(*out.u, P, tol_active);
    json cj = complementarity_json(c);
    cj["comp_tol"] = cfg.solver.kind == SolverKind::Penalty
                         ? (cfg.solver.penalty.comp_tol > 0.0 ? cfg.solver.penalty.comp_tol
                                                              : 2.0 * eps_final + 100.0 * cfg.solver.penalty.newton_tol)
                         : (cfg.solver.penalty.comp_tol > 0.0 ? cfg.solver.penalty.comp_tol
                                                              : 10.0 * cfg.solver.pdas.newton_tol * std::max(1.0, P.scale()));
    rep["complementarity"] = cj;
    rep["max_second_difference"] = max_second_difference(*out.u);
  }
  rep["status"] = out.diverged ? "diverged" : "ok";
  if (out.diverged) rep["message"] = out.message;
  out.report = std::move(rep);
  return out;
}

// ---- diagnostics ----

class Params {
 public:
  Params(const DiagnosticConfig& dc, std::initializer_list<const char*> allowed) : dc_(dc) {
    for (auto it = dc.params.begin(); it != dc.params.end(); ++it) {
      if (it.key() == "name") continue;
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) {
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        fail("unknown parameter \"" + it.key() + "\" for " + dc.name + " (valid: " + list + ")");
      }
    }
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ValidationError(dc_.where + ": " + msg); }
  bool has(const char* k) const { return dc_.params.contains(k); }
  double number(const char* k, double def) const {
    if (!has(k)) return def;
    const json& v = dc_.params[k];
    if (!v.is_number() || !std::isfinite(v.get<double>())) fail(std::string(k) + " must be a finite number");
    return v.get<double>();
  }
  double positive(const char* k, double def) const {
    const double v = number(k, def);
    if (!(v > 0.0)) fail(std::string(k) + " must be positive");
    return v;
  }
  long long integer(const char* k, long long def) const {
    if (!has(k)) return def;
    const json& v = dc_.params[k];
    if (!v.is_number_integer()) fail(std::string(k) + " must be an integer");
    return v.get<long long>();
  }
  std::string string(const char* k, const std::string& def) const {
    if (!has(k)) return def;
    const json& v = dc_.params[k];
    if (!v.is_string()) fail(std::string(k) + " must be a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const char* k) const {
    const json& v = dc_.params[k];
    if (!v.is_array()) fail(std::string(k) + " must be an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) fail(std::string(k) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  const DiagnosticConfig& dc_;
};

// Reduced-form view of a solution: v = u - phi1 against psi = phi2 - phi1.
struct Analysis {
  const RunConfig& cfg;
  const ProblemSpec& P;
  const ScalarField& u;
  ProblemSpec R;
  ScalarField v;
  ScalarField psi;
  SetDecomposition sets;
  double tol;

  Analysis(const RunConfig& c, const ProblemSpec& p, const ScalarField& u)
      : cfg(c), P(p), u(u), R(p.form() == ProblemForm::Reduced ? p : reduce_problem(p)),
        v(u.grid(), projected(u, p)), psi(R.phi2()), sets(coincidence_sets(v, psi, set_tol(c, v))),
        tol(sets.tol) {}

  // u - phi1 clamped to [0, psi]. A penalized solution may sit up to eps
  // outside the obstacles; the clamp keeps contact nodes at exact contact.
  static std::vector<double> projected(const ScalarField& u, const ProblemSpec& p) {
    std::vector<double> r(u.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double top = p.phi2()[k] - p.phi1()[k];
      r[k] = std::clamp(u[k] - p.phi1()[k], 0.0, top);
    }
    return r;
  }
  static double set_tol(const RunConfig& c, const ScalarField& v) {
    const double t = default_set_tol(v) * c.set_tol_factor / 10.0;
    return t > 0.0 ? t : 1e-300;
  }
  const Grid& grid() const { return v.grid(); }
  int dim() const { return grid().dim(); }
  double h() const { return grid().max_h(); }
};

const NodeMask* mask_by_name(const Analysis& A, const std::string& name) {
  if (name == "gamma_u") return &A.sets.gamma_u;
  if (name == "gamma_d") return &A.sets.gamma_d;
  if (name == "gamma_psi") return &A.sets.gamma_psi;
  if (name == "lambda_u") return &A.sets.lambda_u;
  if (name == "contact_psi") return &A.sets.contact_psi;
  if (name == "omega_u") return &A.sets.omega_u;
  return nullptr;
}

Point read_point(const Params& prm, const json& arr, int dim) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != dim) prm.fail("\"at\" must list " + std::to_string(dim) + " coordinates");
  Point p{};
  for (int i = 0; i < dim; ++i) {
    if (!arr[i].is_number()) prm.fail("\"at\" must list numbers");
    p[i] = arr[i].get<double>();
  }
  return p;
}

double dist2(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::size_t snap_point(const Analysis& A, const Params& prm, const Point& at, const std::string& snap) {
  const Grid& g = A.grid();
  if (!g.contains(at)) prm.fail("\"at\" lies outside the grid");
  if (snap == "node") {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double d = dist2(g.node(k), at, A.dim());
      if (d < bd) bd = d, best = k;
    }
    return best;
  }
  const NodeMask* m = mask_by_name(A, snap);
  if (!m) prm.fail("unknown snap \"" + snap + "\" (valid: gamma_u, gamma_d, gamma_psi, node)");
  std::size_t best = g.size();
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!(*m)[k]) continue;
    const double d = dist2(g.node(k), at, A.dim());
    if (d < bd) bd = d, best = k;
  }
  if (best == g.size()) prm.fail("no " + snap + " nodes to snap \"at\" to");
  return best;
}

// Descending r_max, r_max / 2, ... down to r_min.
std::vector<double> dyadic(double r_max, double r_min) {
  std::vector<double> r;
  for (double x = r_max; x >= r_min * (1.0 - 1e-12); x *= 0.5) r.push_back(x);
  return r;
}

std::vector<double> radii_param(const Params& prm, const char* key, double r_max, double r_min) {
  std::vector<double> r = prm.has(key) ? prm.numbers(key)
                                        : dyadic(prm.positive("r_max", r_max), prm.positive("r_min", r_min));
  if (r.empty()) prm.fail(std::string(key) + " is empty");
  for (double x : r)
    if (!(x > 0.0)) prm.fail(std::string(key) + " entries must be positive");
  return r;
}

Point auto_axis(const Analysis& A, std::size_t node) {
  const Grid& g = A.grid();
  const int n = A.dim();
  const Point c = g.node(node);
  const double R = 3.0 * A.h();
  Point s{};
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (dist2(g.node(k), c, n) > R * R) continue;
    const Point gr = central_gradient(g, A.v.values(), k);
    for (int a = 0; a < n; ++a) s[a] += gr[a];
  }
  const double nn = norm(s, n);
  if (!(nn > 0.0)) return Point{};
  for (int a = 0; a < n; ++a) s[a] /= nn;
  return s;
}

struct DiagResult {
  json report;
  bool pass = true;
  std::vector<std::pair<std::string, std::string>> extra;  // (file, contents)
};

std::string csv_real(double v) { return format_real(v); }

DiagResult diag_complementarity(const Analysis& A, const DiagnosticConfig& dc, const json& solve_report) {
  Params prm(dc, {"tol", "tol_active"});
  const json& c = solve_report.at("complementarity");
  ComplementarityReport r;
  double tol_active = prm.positive("tol_active", c.at("tol_active").get<double>());
  r = residual_report(A.u, A.P, tol_active);
  const double tol = prm.positive("tol", c.at("comp_tol").get<double>());
  DiagResult out;
  out.report = complementarity_json(r);
  out.report["tol"] = tol;
  out.report["worst"] = r.worst();
  out.pass = r.worst() <= tol;
  out.report["pass"] = out.pass;
  return out;
}

DiagResult diag_growth(const Analysis& A, const DiagnosticConfig& dc) {
  Params prm(dc, {"at", "snap", "radii", "r_max", "r_min", "max_spread"});
  const Grid& g = A.grid();
  const int n = A.dim();
  const std::vector<double> radii = [&] {
    std::vector<double> r = radii_param(prm, "radii", 0.125, 4.0 * A.h());
    std::sort(r.begin(), r.end());
    return r;
  }();
  const double max_spread = prm.positive("max_spread", 0.5);
  std::vector<std::size_t> points;
  std::size_t skipped = 0;
  if (prm.has("at")) {
    points.push_back(snap_point(A, prm, read_point(prm, dc.params["at"], n), prm.string("snap", "gamma_u")));
  } else {
    const NodeMask* m = mask_by_name(A, prm.string("snap", "gamma_u"));
    if (!m) prm.fail("unknown snap set");
    for (std::size_t k = 0; k < g.size(); ++k)
      if ((*m)[k]) points.push_back(k);
    if (points.empty()) prm.fail("no free-boundary nodes were detected");
  }
  json pts = json::array();
  std::ostringstream csv;
  csv << "node";
  for (int a = 0; a < n; ++a) csv << ",x" << (a + 1);
  csv << ",r,sup_over_r2\n";
  double c0 = 0.0, spread = 0.0;
  bool finite = true;
  for (std::size_t k : points) {
    GrowthReport gr;
    try {
      gr = growth_report(A.v, k, radii);
    } catch (const DomainError&) {
      if (prm.has("at")) throw;
      ++skipped;
      continue;
    }
    for (double q : gr.sup_over_r2) finite = finite && std::isfinite(q);
    c0 = std::max(c0, gr.c0_estimate);
    spread = std::max(spread, gr.spread());
    pts.push_back(json{{"node", k},
                       {"x", point_json(g.node(k), n)},
                       {"sup_over_r2", gr.sup_over_r2},
                       {"c0_estimate", gr.c0_estimate},
                       {"spread", gr.spread()}});
    for (std::size_t i = 0; i < gr.radii.size(); ++i) {
      csv << k;
      const Point x = g.node(k);
      for (int a = 0; a < n; ++a) csv << "," << csv_real(x[a]);
      csv << "," << csv_real(gr.radii[i]) << "," << csv_real(gr.sup_over_r2[i]) << "\n";
    }
  }
  DiagResult out;
  out.pass = finite && !pts.empty() && spread < max_spread;
  out.report = json{{"radii", radii},      {"points", pts},           {"points_tested", pts.size()},
                    {"points_skipped", skipped}, {"c0_estimate", c0}, {"max_spread", spread},
                    {"spread_limit", max_spread}, {"set_tol", A.tol},  {"pass", out.pass}};
  out.extra.emplace_back("growth.csv", csv.str());
  return out;
}

DiagResult diag_nondegeneracy(const Analysis& A, const DiagnosticConfig& dc) {
  Params prm(dc, {"c0", "radii", "r_max", "r_min", "slack", "max_points"});
  double c0;
  if (prm.has("c0")) {
    c0 = prm.positive("c0", 1.0);
  } else {
    c0 = std::numeric_limits<double>::infinity();
    for (std::size_t k : A.R.interior_nodes()) c0 = std::min(c0, A.R.source(k));
    if (!(c0 > 0.0)) prm.fail("the reduced source is not bounded below by a positive c0; pass \"c0\" explicitly");
  }
  const std::vector<double> radii = radii_param(prm, "radii", 0.125, 4.0 * A.h());
  const double slack = prm.number("slack", 0.2);
  if (!(slack >= 0.0 && slack < 1.0)) prm.fail("slack must lie in [0, 1)");
  const long long mp = prm.integer("max_points", 400);
  if (mp < 1) prm.fail("max_points must be at least 1");
  const NondegeneracyReport r =
      nondegeneracy_check(A.v, A.sets, A.R.op(), c0, radii, slack, static_cast<std::size_t>(mp));
  json fails = json::array();
  for (std::size_t i = 0; i < r.failures.size() && i < 50; ++i) {
    const auto& f = r.failures[i];
    fails.push_back(json{{"node", f.node}, {"x", point_json(A.grid().node(f.node), A.dim())}, {"r", f.r},
                         {"shell_max", f.shell_max}, {"required", f.required}});
  }
  DiagResult out;
  out.pass = r.pass() && r.points_tested > 0;
  out.report = json{{"c0", c0},
                    {"constant", r.constant},
                    {"slack", r.slack},
                    {"radii", r.radii},
                    {"points_tested", r.points_tested},
                    {"checks", r.checks},
                    {"failure_count", r.failures.size()},
                    {"failures", fails},
                    {"pass", out.pass}};
  return out;
}

DiagResult diag_thickness(const Analysis& A, const DiagnosticConfig& dc) {
  Params prm(dc, {"at", "snap", "set", "radii", "r_max", "r_min", "min_delta"});
  const std::size_t node = snap_point(A, prm, [&] {
    if (!prm.has("at")) prm.fail("needs \"at\": the coordinates of the ball centre");
    return read_point(prm, dc.params["at"], A.dim());
  }(), prm.string("snap", "gamma_u"));
  const NodeMask* m = mask_by_name(A, prm.string("set", "lambda_u"));
  if (!m) prm.fail("unknown set (valid: lambda_u, contact_psi, omega_u)");
  const std::vector<double> radii = radii_param(prm, "radii", 0.25, 4.0 * A.h());
  const ThicknessReport r = thickness_report(*m, A.grid(), A.grid().node(node), radii);
  DiagResult out;
  double mind = std::numeric_limits<double>::infinity();
  for (double d : r.delta) mind = std::min(mind, d);
  if (prm.has("min_delta")) out.pass = mind >= prm.number("min_delta", 0.0);
  out.report = json{{"center", point_json(r.center, A.dim())}, {"node", node}, {"set", prm.string("set", "lambda_u")},
                    {"radii", r.radii},  {"md", r.md},  {"delta", r.delta},  {"min_delta", mind},
                    {"pass", out.pass}};
  return out;
}

DiagResult diag_monotonicity(const Analysis& A, const DiagnosticConfig& dc) {
  Params prm(dc, {"at", "snap", "deltas", "radii", "r_max", "r_min", "axis", "n_directions", "slack"});
  const int n = A.dim();
  const std::size_t node = snap_point(A, prm, [&] {
    if (!prm.has("at")) prm.fail("needs \"at\": the coordinates of the free-boundary point");
    return read_point(prm, dc.params["at"], n);
  }(), prm.string("snap", "gamma_u"));
  const std::vector<double> deltas = prm.has("deltas") ? prm.numbers("deltas") : std::vector<double>{0.25, 0.5, 1.0};
  for (double d : deltas)
    if (!(d > 0.0 && d <= 1.0)) prm.fail("deltas must lie in (0, 1]");
  const std::vector<double> radii = radii_param(prm, "radii", 0.25, 4.0 * A.h());
  Point axis{};
  if (prm.has("axis")) {
    axis = read_point(prm, dc.params["axis"], n);
    if (!(norm(axis, n) > 0.0)) prm.fail("axis must be nonzero");
  } else {
    axis = auto_axis(A, node);
    if (!(norm(axis, n) > 0.0)) prm.fail("cannot infer an axis at this point; pass \"axis\"");
  }
  const long long nd = prm.integer("n_directions", 64);
  if (nd < 1) prm.fail("n_directions must be at least 1");
  const double slack = prm.has("slack") ? prm.positive("slack", 1.0) : -1.0;
  json checks = json::array();
  bool pass = true;
  double mn = std::numeric_limits<double>::infinity();
  for (double d : deltas) {
    for (double r : radii) {
      const MonotonicityReport m = monotonicity_check(A.v, d, node, r, static_cast<int>(nd), axis, A.cfg.seed, slack);
      pass = pass && m.pass;
      mn = std::min(mn, m.min_directional_derivative);
      checks.push_back(json{{"delta", m.delta},
                            {"region_radius", m.region_radius},
                            {"directions_tested", m.directions_tested},
                            {"nodes_tested", m.nodes_tested},
                            {"min_directional_derivative", m.min_directional_derivative},
                            {"slack", m.slack},
                            {"pass", m.pass}});
    }
  }
  DiagResult out;
  out.pass = pass;
  Point ax = axis;
  const double an = norm(ax, n);
  for (int a = 0; a < n; ++a) ax[a] /= an;
  out.report = json{{"center", point_json(A.grid().node(node), n)}, {"node", node}, {"axis", point_json(ax, n)},
                    {"checks", checks}, {"min_directional_derivative", mn}, {"pass", pass}};
  return out;
}

DiagResult diag_blowup(const Analysis& A, const DiagnosticConfig& dc) {
  Params prm(dc, {"at", "snap", "rhos", "r_max", "r_min", "fit_tol", "eps0", "expect", "max_half_nodes"});
  const int n = A.dim();
  const std::size_t node = snap_point(A, prm, [&] {
    if (!prm.has("at")) prm.fail("needs \"at\": the coordinates of the free-boundary point");
    return read_point(prm, dc.params["at"], n);
  }(), prm.string("snap", "gamma_d"));
  const std::vector<double> rhos = radii_param(prm, "rhos", 0.25, 8.0 * A.h());
  BlowupParams bp;
  bp.fit_tol = prm.positive("fit_tol", 0.05);
  bp.eps0 = prm.positive("eps0", 0.1);
  bp.max_half_nodes = static_cast<int>(prm.integer("max_half_nodes", 64));
  bp.set_tol = A.tol;
  bp.op = &A.R.op();
  bp.source_value = A.R.source(node);
  const BlowupReport r = classify_blowup(A.v, A.psi, node, rhos, bp);
  json fits = json::array();
  for (std::size_t i = 0; i < r.rhos.size(); ++i) {
    json f{{"rho", r.rhos[i]},
           {"u", json{{"nu", point_json(r.fits_u[i].nu, n)}, {"c", r.fits_u[i].c}, {"residual", r.fits_u[i].residual}}}};
    if (r.fits_psi[i]) {
      const HalfspaceFit& p = *r.fits_psi[i];
      f["psi"] = json{{"nu", point_json(p.nu, n)}, {"c", p.c}, {"residual", p.residual}};
    } else {
      f["psi"] = nullptr;
    }
    fits.push_back(f);
  }
  const std::string expect = prm.string("expect", "");
  if (!expect.empty() && expect != "halfspace" && expect != "upper-obstacle" && expect != "inconclusive") {
    prm.fail("expect must be halfspace, upper-obstacle or inconclusive");
  }
  DiagResult out;
  const std::string verdict = to_string(r.verdict);
  out.pass = expect.empty() ? r.verdict != BlowupVerdict::Inconclusive : verdict == expect;
  out.report = json{{"center", point_json(A.grid().node(node), n)},
                    {"node", node},
                    {"in_gamma", r.in_gamma},
                    {"in_gamma_d", r.in_gamma_d},
                    {"fits", fits},
                    {"thickness", json{{"radii", r.thickness_trace.radii}, {"delta", r.thickness_trace.delta},
                                       {"md", r.thickness_trace.md}}},
                    {"thickness_ok", r.thickness_ok},
                    {"verdict", verdict},
                    {"c", r.c},
                    {"a", r.a},
                    {"source_scale", r.source_scale ? json(*r.source_scale) : json(nullptr)},
                    {"branch", r.branch},
                    {"fit_tol", bp.fit_tol},
                    {"eps0", bp.eps0},
                    {"pass", out.pass}};
  return out;
}

// Counts increases of v along the list; each must stay within tol relative.
bool decreasing_with_inversions(const std::vector<double>& v, int max_inv, double tol, int& inversions) {
  inversions = 0;
  bool ok = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) {
      ++inversions;
      if (v[i] > v[i - 1] * (1.0 + tol) + 1e-14) ok = false;
    }
  }
  return ok && inversions <= max_inv;
}

DiagResult diag_fbgraph(const Analysis& A, const DiagnosticConfig& dc) {
  Params prm(dc, {"at", "snap", "axis", "radii", "r_max", "r_min", "max_inversions", "inversion_tol"});
  const int n = A.dim();
  const std::size_t node = snap_point(A, prm, [&] {
    if (!prm.has("at")) prm.fail("needs \"at\": the coordinates of the free-boundary point");
    return read_point(prm, dc.params["at"], n);
  }(), prm.string("snap", "gamma_u"));
  int axis;
  if (prm.has("axis")) {
    axis = static_cast<int>(prm.integer("axis", 0));
    if (axis < 0 || axis >= n) prm.fail("axis must be an index in [0, " + std::to_string(n - 1) + "]");
  } else {
    const Point e = auto_axis(A, node);
    axis = n - 1;
    double best = -1.0;
    for (int a = 0; a < n; ++a)
      if (std::abs(e[a]) > best) best = std::abs(e[a]), axis = a;
  }
  std::vector<double> radii = radii_param(prm, "radii", 0.25, 4.0 * A.h());
  std::sort(radii.rbegin(), radii.rend());
  const FBGraph fb = extract_fb_graph(A.v, A.sets, axis, A.grid().node(node), radii);
  std::vector<double> nv, lip;
  json nvj = json::array(), lipj = json::array();
  for (auto [r, v] : fb.normal_variation) {
    nv.push_back(v);
    nvj.push_back(json{{"r", r}, {"value", v}});
  }
  for (auto [r, v] : fb.lipschitz_local) {
    lip.push_back(v);
    lipj.push_back(json{{"r", r}, {"value", v}});
  }
  const int max_inv = static_cast<int>(prm.integer("max_inversions", 1));
  const double inv_tol = prm.number("inversion_tol", 0.10);
  int inversions = 0;
  DiagResult out;
  out.pass = decreasing_with_inversions(nv, max_inv, inv_tol, inversions);
  std::ostringstream csv;
  for (int a = 0; a < n; ++a)
    if (a != axis) csv << "x" << (a + 1) << ",";
  csv << "height,resolved";
  for (int a = 0; a < n; ++a) csv << ",nu" << (a + 1);
  csv << "\n";
  for (const GraphSample& s : fb.samples) {
    for (int a = 0; a < n; ++a)
      if (a != axis) csv << csv_real(s.xprime[a]) << ",";
    csv << csv_real(s.height) << "," << (s.resolved ? 1 : 0);
    for (int a = 0; a < n; ++a) csv << "," << (s.has_normal ? csv_real(s.nu[a]) : std::string());
    csv << "\n";
  }
  out.report = json{{"center", point_json(A.grid().node(node), n)},
                    {"node", node},
                    {"axis", axis},
                    {"samples", fb.samples.size()},
                    {"unresolved", fb.unresolved},
                    {"nu0", point_json(fb.nu0, n)},
                    {"normal_variation", nvj},
                    {"lipschitz_local", lipj},
                    {"inversions", inversions},
                    {"max_inversions", max_inv},
                    {"inversion_tol", inv_tol},
                    {"pass", out.pass}};
  out.extra.emplace_back("fbgraph.csv", csv.str());
  return out;
}

void run_diagnostics(const RunConfig& cfg, const ProblemSpec& P, const ScalarField& u, const json& solve_report,
                     ArtifactWriter& w, RunOutcome& out) {
  if (cfg.diagnostics.empty()) return;
  const Analysis A(cfg, P, u);
  for (const DiagnosticConfig& dc : cfg.diagnostics) {
    DiagResult r;
    if (dc.name == "complementarity") r = diag_complementarity(A, dc, solve_report);
    else if (dc.name == "growth") r = diag_growth(A, dc);
    else if (dc.name == "nondegeneracy") r = diag_nondegeneracy(A, dc);
    else if (dc.name == "thickness") r = diag_thickness(A, dc);
    else if (dc.name == "monotonicity") r = diag_monotonicity(A, dc);
    else if (dc.name == "blowup") r = diag_blowup(A, dc);
    else if (dc.name == "fbgraph") r = diag_fbgraph(A, dc);
    else throw ValidationError(dc.where + ": unknown diagnostic " + dc.name);
    r.report = json{{"diagnostic", dc.name}, {"set_tol", A.tol}, {"result", r.report}, {"pass", r.pass}};
    w.json_file(dc.name + ".json", r.report);
    for (const auto& [file, body] : r.extra) w.text(file, body);
    if (!r.pass) out.failed_diagnostics.push_back(dc.name);
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void finish(RunOutcome& out) {
  if (out.exit_code == kExitOk && !out.failed_diagnostics.empty()) {
    out.exit_code = kExitDiagnosticFailure;
    out.status = "diagnostic_failure";
    std::string list;
    for (const auto& d : out.failed_diagnostics) list += (list.empty() ? "" : ", ") + d;
    out.message = "diagnostics failed: " + list;
  }
  if (out.status.empty()) out.status = "ok";
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(p.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace

RunOutcome run_solve(const RunConfig& cfg0, const RunOverrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve_config(cfg0, ov);
  const ProblemSpec P = build_problem(cfg);
  ArtifactWriter w(cfg.output_dir);
  RunOutcome out;
  out.output_dir = cfg.output_dir;

  SolveOutput s = solve_problem(cfg, P);
  if (s.u) w.field("solution", *s.u, s.u->size() <= kCsvNodeLimit);
  w.json_file("solve_report.json", s.report);
  if (s.diverged) {
    out.exit_code = kExitDivergence;
    out.status = "diverged";
    out.message = s.message;
  } else {
    run_diagnostics(cfg, P, *s.u, s.report, w, out);
  }
  finish(out);
  out.artifacts = w.names();
  write_manifest(w, cfg, "solve", out, seconds_since(t0));
  return out;
}

RunOutcome run_diagnose(const RunConfig& cfg0, const RunOverrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve_config(cfg0, ov);
  const ProblemSpec P = build_problem(cfg);
  const fs::path dir = cfg.output_dir;
  const ScalarField u = load_field(dir / "solution");
  if (!(u.grid() == P.grid())) throw ValidationError("stored solution is on a different grid than the config");
  const json report = read_json(dir / "solve_report.json");
  if (report.value("status", "") != "ok") throw ValidationError("stored solve did not finish; rerun solve");
  ArtifactWriter w(dir);
  // The stored solve artifacts stay part of the run.
  for (const char* n : {"solution.json", "solution.bin", "solution.csv", "solve_report.json"})
    if (fs::exists(dir / n)) w.add(n);
  RunOutcome out;
  out.output_dir = dir;
  run_diagnostics(cfg, P, u, report, w, out);
  finish(out);
  out.artifacts = w.names();
  write_manifest(w, cfg, "diagnose", out, seconds_since(t0));
  return out;
}

RunOutcome run_convergence(const RunConfig& cfg0, const RunOverrides& ov, double max_growth) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOverrides base = ov;
  base.grid_scale = 1;
  const RunConfig cfg = resolve_config(cfg0, base);
  ArtifactWriter w(cfg.output_dir);
  RunOutcome out;
  out.output_dir = cfg.output_dir;
  const int levels[3] = {1, 2, 4};
  std::vector<ScalarField> fields;
  json lv = json::array();
  for (int k : levels) {
    RunConfig c = cfg;
    c.diagnostics.clear();
    c.output_dir = cfg.output_dir / ("level_" + std::to_string(k));
    RunOverrides o;
    o.grid_scale = k * ov.grid_scale;
    RunOutcome r = run_solve(c, o);
    for (const auto& a : r.artifacts) w.add("level_" + std::to_string(k) + "/" + a);
    if (r.exit_code != kExitOk) {
      out.exit_code = r.exit_code;
      out.status = r.status;
      out.message = "level " + std::to_string(k) + ": " + r.message;
      out.artifacts = w.names();
      write_manifest(w, cfg, "convergence", out, seconds_since(t0));
      return out;
    }
    fields.push_back(load_field(c.output_dir / "solution"));
    const Grid& g = fields.back().grid();
    lv.push_back(json{{"scale", k * ov.grid_scale},
                      {"counts", g.count_vector()},
                      {"h", g.max_h()},
                      {"max_second_difference", max_second_difference(fields.back())}});
  }
  // Differences on the coarsest nodes.
  const Grid& g1 = fields[0].grid();
  auto coarse_diff = [&](const ScalarField& a, int fa, const ScalarField& b, int fb) {
    double d = 0.0;
    for (std::size_t k = 0; k < g1.size(); ++k) {
      const Index i = g1.unflat(k);
      Index ia{}, ib{};
      for (int ax = 0; ax < g1.dim(); ++ax) ia[ax] = i[ax] * fa, ib[ax] = i[ax] * fb;
      d = std::max(d, std::abs(a[a.grid().flat(ia)] - b[b.grid().flat(ib)]));
    }
    return d;
  };
  const double e12 = coarse_diff(fields[0], 1, fields[1], 2);
  const double e24 = coarse_diff(fields[1], 2, fields[2], 4);
  json order = (e12 > 0.0 && e24 > 0.0) ? json(std::log2(e12 / e24)) : json(nullptr);
  json growth = json::array();
  bool pass = true;
  for (int i = 1; i < 3; ++i) {
    const double a = lv[i - 1]["max_second_difference"].get<double>();
    const double b = lv[i]["max_second_difference"].get<double>();
    // Floor keeps affine solutions (roundoff-level differences) finite.
    const double gr = (b - a) / std::max(a, 1e-6);
    pass = pass && gr < max_growth;
    growth.push_back(gr);
  }
  json rep{{"name", cfg.name},
           {"levels", lv},
           {"e12", e12},
           {"e24", e24},
           {"observed_order", order},
           {"second_difference_growth", growth},
           {"max_growth", max_growth},
           {"pass", pass}};
  w.json_file("convergence.json", rep);
  if (!pass) out.failed_diagnostics.push_back("convergence");
  finish(out);
  out.artifacts = w.names();
  write_manifest(w, cfg, "convergence", out, seconds_since(t0));
  return out;
}

}  // namespace olab
