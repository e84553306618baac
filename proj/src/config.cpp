#include "olab/config.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "olab/error.hpp"
#include "olab/expr.hpp"
#include "olab/field_io.hpp"

namespace olab {

using nlohmann::json;

const char* to_string(SolverKind k) noexcept { return k == SolverKind::Penalty ? "penalty" : "pdas"; }

namespace {

// Line of every value in the (already well-formed) config text, keyed by its
// dotted path, e.g. "problem.grid.counts[0]".
class PositionIndex {
 public:
  explicit PositionIndex(const std::string& s) : s_(s) {
    skip();
    if (i_ < s_.size()) value("");
  }
  int line(const std::string& path) const {
    auto it = lines_.find(path);
    return it == lines_.end() ? 0 : it->second;
  }

 private:
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }
  std::string string_token() {
    std::string out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') ++i_;
      if (i_ < s_.size()) out += s_[i_++];
    }
    ++i_;
    return out;
  }
  void value(const std::string& path) {
    skip();
    lines_.emplace(path, line_);
    if (i_ >= s_.size()) return;
    const char c = s_[i_];
    if (c == '{') {
      ++i_;
      skip();
      while (i_ < s_.size() && s_[i_] != '}') {
        const std::string key = string_token();
        skip();
        ++i_;  // ':'
        value(path.empty() ? key : path + "." + key);
        skip();
        if (i_ < s_.size() && s_[i_] == ',') ++i_;
        skip();
      }
      ++i_;
    } else if (c == '[') {
      ++i_;
      skip();
      int n = 0;
      while (i_ < s_.size() && s_[i_] != ']') {
        value(path + "[" + std::to_string(n++) + "]");
        skip();
        if (i_ < s_.size() && s_[i_] == ',') ++i_;
        skip();
      }
      ++i_;
    } else if (c == '"') {
      string_token();
    } else {
      while (i_ < s_.size() && !std::strchr(",}] \t\r\n", s_[i_])) ++i_;
    }
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

class Reader {
 public:
  Reader(const std::filesystem::path& source, const PositionIndex& pos) : src_(source), pos_(pos) {}

  std::string where(const std::string& path) const {
    std::ostringstream os;
    os << (src_.empty() ? std::string("<config>") : src_.filename().string());
    const int l = pos_.line(path);
    if (l > 0) os << ":" << l;
    os << " (" << (path.empty() ? "<root>" : path) << ")";
    return os.str();
  }
  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw ValidationError(where(path) + ": " + msg);
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string item(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }

  void keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) {
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        fail(join(path, it.key()), "unknown key \"" + it.key() + "\" (valid: " + list + ")");
      }
    }
  }
  const json& req(const json& j, const std::string& path, const char* key) const {
    if (!j.contains(key)) fail(path, std::string("missing required key \"") + key + "\"");
    return j.at(key);
  }
  double number(const json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
  }
  double positive(const json& j, const std::string& path) const {
    const double v = number(j, path);
    if (!(v > 0.0)) fail(path, "must be positive");
    return v;
  }
  long long integer(const json& j, const std::string& path) const {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<long long>();
  }
  std::string string(const json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }
  bool boolean(const json& j, const std::string& path) const {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
  }
  std::vector<double> numbers(const json& j, const std::string& path) const {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], item(path, i)));
    return out;
  }

 private:
  std::filesystem::path src_;
  const PositionIndex& pos_;
};

// Expression strings are parsed here so syntax errors carry the field path.
FieldSource field_source(const Reader& rd, const json& j, const std::string& path,
                         const std::map<std::string, double>& constants) {
  FieldSource fs;
  if (j.is_number()) {
    fs.expr = format_real(rd.number(j, path));
  } else if (j.is_string()) {
    fs.expr = j.get<std::string>();
    try {
      Expression::parse(fs.expr, constants);
    } catch (const ValidationError& e) {
      rd.fail(path, e.what());
    }
  } else if (j.is_object()) {
    rd.keys(j, path, {"file"});
    fs.file = rd.string(rd.req(j, path, "file"), Reader::join(path, "file"));
    if (fs.file.empty()) rd.fail(path, "empty file name");
  } else {
    rd.fail(path, "expected an expression string, a number or {\"file\": stem}");
  }
  return fs;
}

OperatorConfig operator_config(const Reader& rd, const json& j, const std::string& path, int dim,
                               const std::map<std::string, double>& constants, bool member = false) {
  rd.keys(j, path, {"kind", "lambda0", "lambda1", "A", "holder_alpha", "holder_C", "C1", "members"});
  OperatorConfig oc;
  oc.kind = rd.string(rd.req(j, path, "kind"), Reader::join(path, "kind"));
  static const std::set<std::string> kinds{"laplacian", "trace_linear", "pucci_plus", "pucci_minus",
                                           "bellman_sup"};
  if (!kinds.count(oc.kind)) {
    rd.fail(Reader::join(path, "kind"),
            "unknown operator \"" + oc.kind + "\" (valid: laplacian, trace_linear, pucci_plus, pucci_minus, bellman_sup)");
  }
  if (member && oc.kind != "trace_linear" && oc.kind != "laplacian") {
    rd.fail(Reader::join(path, "kind"), "bellman_sup members must be trace_linear or laplacian");
  }
  if (j.contains("lambda0")) oc.lambda0 = rd.positive(j["lambda0"], Reader::join(path, "lambda0"));
  if (j.contains("lambda1")) oc.lambda1 = rd.positive(j["lambda1"], Reader::join(path, "lambda1"));
  if (j.contains("holder_alpha")) {
    const std::string p = Reader::join(path, "holder_alpha");
    oc.holder_alpha = rd.number(j["holder_alpha"], p);
    if (!(*oc.holder_alpha > 0.0 && *oc.holder_alpha <= 1.0)) rd.fail(p, "must lie in (0, 1]");
  }
  if (j.contains("holder_C")) {
    const std::string p = Reader::join(path, "holder_C");
    oc.holder_C = rd.number(j["holder_C"], p);
    if (*oc.holder_C < 0.0) rd.fail(p, "must be nonnegative");
  }
  if (j.contains("C1")) oc.holder_C1 = rd.positive(j["C1"], Reader::join(path, "C1"));

  if (oc.kind == "pucci_plus" || oc.kind == "pucci_minus") {
    rd.req(j, path, "lambda0");
    rd.req(j, path, "lambda1");
  }
  if ((oc.kind == "pucci_plus" || oc.kind == "pucci_minus") && oc.lambda0 > oc.lambda1) {
    rd.fail(Reader::join(path, "lambda0"), "lambda0 must not exceed lambda1");
  }
  if (oc.kind == "trace_linear") {
    const std::string p = Reader::join(path, "A");
    const json& A = rd.req(j, path, "A");
    if (!A.is_array() || static_cast<int>(A.size()) != dim) rd.fail(p, "expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
    for (int r = 0; r < dim; ++r) {
      const std::string pr = Reader::item(p, r);
      if (!A[r].is_array() || static_cast<int>(A[r].size()) != dim) rd.fail(pr, "expected a row of " + std::to_string(dim) + " entries");
      oc.A.emplace_back();
      for (int c = 0; c < dim; ++c) {
        const FieldSource fs = field_source(rd, A[r][c], Reader::item(pr, c), constants);
        if (fs.is_file()) rd.fail(Reader::item(pr, c), "coefficient entries must be expressions");
        if (!A[r][c].is_number()) oc.A_constant = oc.A_constant && Expression::parse(fs.expr, constants).variables() == 0;
        oc.A.back().push_back(fs.expr);
      }
    }
    if (!oc.A_constant) {
      for (const char* k : {"lambda0", "lambda1", "holder_alpha", "holder_C"}) {
        if (!j.contains(k)) rd.fail(path, std::string("variable coefficients need \"") + k + "\"");
      }
    }
  } else if (j.contains("A")) {
    rd.fail(Reader::join(path, "A"), "only trace_linear takes a coefficient matrix");
  }
  if (oc.kind == "bellman_sup") {
    const std::string p = Reader::join(path, "members");
    const json& m = rd.req(j, path, "members");
    if (!m.is_array() || m.empty()) rd.fail(p, "expected a nonempty array of operators");
    for (std::size_t i = 0; i < m.size(); ++i) {
      oc.members.push_back(operator_config(rd, m[i], Reader::item(p, i), dim, constants, true));
    }
  } else if (j.contains("members")) {
    rd.fail(Reader::join(path, "members"), "only bellman_sup takes members");
  }
  return oc;
}

void solver_config(const Reader& rd, const json& j, const std::string& path, SolverConfig& sc) {
  rd.keys(j, path, {"kind", "schedule", "eps0", "stages", "factor", "newton_tol", "max_newton", "max_stall",
                    "armijo_c", "max_backtracks", "init", "tol_active", "comp_tol", "reduce", "pdas"});
  auto key = [&](const char* k) { return Reader::join(path, k); };
  if (j.contains("kind")) {
    const std::string k = rd.string(j["kind"], key("kind"));
    if (k == "penalty") sc.kind = SolverKind::Penalty;
    else if (k == "pdas") sc.kind = SolverKind::Pdas;
    else rd.fail(key("kind"), "unknown solver \"" + k + "\" (valid: penalty, pdas)");
  }
  if (j.contains("schedule")) {
    if (j.contains("eps0") || j.contains("stages") || j.contains("factor")) {
      rd.fail(key("schedule"), "give either schedule or eps0/stages/factor, not both");
    }
    sc.schedule = rd.numbers(j["schedule"], key("schedule"));
    if (sc.schedule.empty()) rd.fail(key("schedule"), "schedule is empty");
    for (std::size_t i = 0; i < sc.schedule.size(); ++i) {
      if (!(sc.schedule[i] > 0.0)) rd.fail(Reader::item(key("schedule"), i), "eps must be positive");
      if (i > 0 && !(sc.schedule[i] < sc.schedule[i - 1])) {
        rd.fail(Reader::item(key("schedule"), i), "schedule must be strictly decreasing");
      }
    }
  }
  if (j.contains("eps0")) sc.eps0 = rd.positive(j["eps0"], key("eps0"));
  if (j.contains("stages")) {
    const long long s = rd.integer(j["stages"], key("stages"));
    if (s < 1 || s > 40) rd.fail(key("stages"), "stages must be in [1, 40]");
    sc.stages = static_cast<int>(s);
  }
  if (j.contains("factor")) {
    sc.factor = rd.number(j["factor"], key("factor"));
    if (!(sc.factor > 0.0 && sc.factor < 1.0)) rd.fail(key("factor"), "factor must lie in (0, 1)");
  }
  PenaltyParams& pp = sc.penalty;
  if (j.contains("newton_tol")) pp.newton_tol = rd.positive(j["newton_tol"], key("newton_tol"));
  if (j.contains("max_newton")) {
    pp.max_newton = static_cast<int>(rd.integer(j["max_newton"], key("max_newton")));
    if (pp.max_newton < 1) rd.fail(key("max_newton"), "must be at least 1");
  }
  if (j.contains("max_stall")) {
    pp.max_stall = static_cast<int>(rd.integer(j["max_stall"], key("max_stall")));
    if (pp.max_stall < 1) rd.fail(key("max_stall"), "must be at least 1");
  }
  if (j.contains("armijo_c")) {
    pp.armijo_c = rd.number(j["armijo_c"], key("armijo_c"));
    if (!(pp.armijo_c > 0.0 && pp.armijo_c < 0.5)) rd.fail(key("armijo_c"), "must lie in (0, 0.5)");
  }
  if (j.contains("max_backtracks")) {
    pp.max_backtracks = static_cast<int>(rd.integer(j["max_backtracks"], key("max_backtracks")));
    if (pp.max_backtracks < 0) rd.fail(key("max_backtracks"), "must be nonnegative");
  }
  if (j.contains("init")) {
    const std::string v = rd.string(j["init"], key("init"));
    if (v == "lower" || v == "phi1") pp.init = InitKind::Lower;
    else if (v == "upper" || v == "phi2") pp.init = InitKind::Upper;
    else rd.fail(key("init"), "unknown init \"" + v + "\" (valid: lower, upper)");
  }
  if (j.contains("tol_active")) pp.tol_active = rd.positive(j["tol_active"], key("tol_active"));
  if (j.contains("comp_tol")) pp.comp_tol = rd.positive(j["comp_tol"], key("comp_tol"));
  if (j.contains("reduce")) sc.reduce = rd.boolean(j["reduce"], key("reduce"));
  if (j.contains("pdas")) {
    const std::string p = key("pdas");
    const json& d = j["pdas"];
    rd.keys(d, p, {"newton_tol", "max_newton", "max_cycles", "mu"});
    if (d.contains("newton_tol")) sc.pdas.newton_tol = rd.positive(d["newton_tol"], Reader::join(p, "newton_tol"));
    if (d.contains("max_newton")) sc.pdas.max_newton = static_cast<int>(rd.integer(d["max_newton"], Reader::join(p, "max_newton")));
    if (d.contains("max_cycles")) sc.pdas.max_cycles = static_cast<int>(rd.integer(d["max_cycles"], Reader::join(p, "max_cycles")));
    if (d.contains("mu")) sc.pdas.mu = rd.positive(d["mu"], Reader::join(p, "mu"));
    if (sc.pdas.max_newton < 1 || sc.pdas.max_cycles < 1) rd.fail(p, "iteration limits must be at least 1");
  }
}

std::string valid_diagnostics() {
  std::string s;
  for (const char* n : kDiagnosticNames) s += std::string(s.empty() ? "" : ", ") + n;
  return s;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to line:column.
    int line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const auto p = what.find("parse error");
    if (p != std::string::npos) what = what.substr(p);
    throw ValidationError((source.empty() ? std::string("<config>") : source.filename().string()) + ":" +
                          std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
  const PositionIndex pos(text);
  const Reader rd(source, pos);

  RunConfig cfg;
  cfg.source = source;
  cfg.text = text;
  rd.keys(root, "", {"name", "problem", "solver", "diagnostics", "output_dir", "seed", "analysis"});
  if (root.contains("name")) cfg.name = rd.string(root["name"], "name");
  if (root.contains("seed")) {
    const long long s = rd.integer(root["seed"], "seed");
    if (s < 0) rd.fail("seed", "seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (root.contains("output_dir")) cfg.output_dir = rd.string(root["output_dir"], "output_dir");

  const json& pj = rd.req(root, "", "problem");
  rd.keys(pj, "problem", {"form", "grid", "operator", "constants", "phi1", "phi2", "g", "f"});
  if (pj.contains("form")) {
    const std::string f = rd.string(pj["form"], "problem.form");
    if (f == "general") cfg.form = ProblemForm::General;
    else if (f == "reduced") cfg.form = ProblemForm::Reduced;
    else rd.fail("problem.form", "unknown form \"" + f + "\" (valid: general, reduced)");
  }

  const json& gj = rd.req(pj, "problem", "grid");
  rd.keys(gj, "problem.grid", {"lo", "hi", "counts"});
  cfg.lo = rd.numbers(rd.req(gj, "problem.grid", "lo"), "problem.grid.lo");
  cfg.hi = rd.numbers(rd.req(gj, "problem.grid", "hi"), "problem.grid.hi");
  {
    const json& cj = rd.req(gj, "problem.grid", "counts");
    if (!cj.is_array()) rd.fail("problem.grid.counts", "expected an array of integers");
    for (std::size_t i = 0; i < cj.size(); ++i) {
      const std::string p = Reader::item("problem.grid.counts", i);
      const long long c = rd.integer(cj[i], p);
      if (c < 3) rd.fail(p, "counts must be >= 3 (got " + std::to_string(c) + ")");
      if (c > 100000) rd.fail(p, "counts is unreasonably large");
      cfg.counts.push_back(static_cast<int>(c));
    }
  }
  const std::size_t dim = cfg.counts.size();
  if (dim < 1 || dim > 3) rd.fail("problem.grid.counts", "grid dimension must be 1, 2 or 3");
  if (cfg.lo.size() != dim) rd.fail("problem.grid.lo", "expected " + std::to_string(dim) + " entries to match counts");
  if (cfg.hi.size() != dim) rd.fail("problem.grid.hi", "expected " + std::to_string(dim) + " entries to match counts");
  for (std::size_t a = 0; a < dim; ++a) {
    if (!(cfg.hi[a] > cfg.lo[a])) rd.fail(Reader::item("problem.grid.hi", a), "hi must exceed lo");
  }

  if (pj.contains("constants")) {
    const json& c = pj["constants"];
    if (!c.is_object()) rd.fail("problem.constants", "expected an object of named numbers");
    for (auto it = c.begin(); it != c.end(); ++it) {
      const std::string p = Reader::join("problem.constants", it.key());
      const std::string& k = it.key();
      const bool ident = !k.empty() && (std::isalpha(static_cast<unsigned char>(k[0])) || k[0] == '_') &&
                         std::all_of(k.begin(), k.end(), [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; });
      if (!ident) rd.fail(p, "constant names must be identifiers");
      static const std::set<std::string> reserved{"x", "y", "z", "x1", "x2", "x3", "pi", "abs", "min", "max",
                                                  "sqrt", "exp", "log", "sin", "cos", "pos"};
      if (reserved.count(k)) rd.fail(p, "\"" + k + "\" is a reserved name");
      cfg.constants[k] = rd.number(it.value(), p);
    }
  }
  cfg.op = operator_config(rd, rd.req(pj, "problem", "operator"), "problem.operator", static_cast<int>(dim),
                           cfg.constants);
  cfg.phi1 = field_source(rd, rd.req(pj, "problem", "phi1"), "problem.phi1", cfg.constants);
  cfg.phi2 = field_source(rd, rd.req(pj, "problem", "phi2"), "problem.phi2", cfg.constants);
  cfg.g = field_source(rd, rd.req(pj, "problem", "g"), "problem.g", cfg.constants);
  if (pj.contains("f")) cfg.f = field_source(rd, pj["f"], "problem.f", cfg.constants);

  if (root.contains("solver")) solver_config(rd, root["solver"], "solver", cfg.solver);
  if (cfg.solver.reduce && cfg.form == ProblemForm::Reduced) {
    rd.fail("solver.reduce", "the problem is already in reduced form");
  }

  if (root.contains("analysis")) {
    const json& a = root["analysis"];
    rd.keys(a, "analysis", {"set_tol_factor"});
    if (a.contains("set_tol_factor")) cfg.set_tol_factor = rd.positive(a["set_tol_factor"], "analysis.set_tol_factor");
  }

  if (root.contains("diagnostics")) {
    const json& dj = root["diagnostics"];
    if (!dj.is_array()) rd.fail("diagnostics", "expected an array");
    for (std::size_t i = 0; i < dj.size(); ++i) {
      const std::string p = Reader::item("diagnostics", i);
      DiagnosticConfig dc;
      if (dj[i].is_string()) {
        dc.name = dj[i].get<std::string>();
        dc.params = json{{"name", dc.name}};
      } else if (dj[i].is_object()) {
        dc.name = rd.string(rd.req(dj[i], p, "name"), Reader::join(p, "name"));
        dc.params = dj[i];
      } else {
        rd.fail(p, "expected a diagnostic name or an object with \"name\"");
      }
      bool known = false;
      for (const char* n : kDiagnosticNames) known = known || dc.name == n;
      if (!known) rd.fail(p, "unknown diagnostic \"" + dc.name + "\" (valid: " + valid_diagnostics() + ")");
      for (const auto& other : cfg.diagnostics) {
        if (other.name == dc.name) rd.fail(p, "diagnostic \"" + dc.name + "\" is listed twice");
      }
      dc.where = rd.where(p);
      cfg.diagnostics.push_back(std::move(dc));
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_grid_scale(RunConfig& cfg, int k) {
  if (k < 1) throw ValidationError("grid scale must be a positive integer");
  for (int& c : cfg.counts) c = (c - 1) * k + 1;
  if (k == 1) return;
  // Continue the schedule until eps_final has shrunk by k^2 as well, so the
  // penalty offset keeps its ratio to h^2.
  SolverConfig& sc = cfg.solver;
  if (sc.schedule.empty()) {
    double e = 1.0;
    while (e > 1.0 / (double(k) * k) * (1 + 1e-12)) e *= sc.factor, ++sc.stages;
  } else {
    const double ratio = sc.schedule.size() > 1 ? sc.schedule.back() / sc.schedule[sc.schedule.size() - 2] : 0.25;
    const double target = sc.schedule.back() / (double(k) * k);
    while (sc.schedule.back() > target * (1 + 1e-12)) sc.schedule.push_back(sc.schedule.back() * ratio);
  }
}

Grid config_grid(const RunConfig& cfg) { return Grid::build(cfg.lo, cfg.hi, cfg.counts); }

OperatorSpec build_operator(const OperatorConfig& oc, int dim, const std::map<std::string, double>& constants) {
  if (oc.kind == "laplacian") {
    OperatorSpec op = OperatorSpec::laplacian(dim);
    return op.with_holder(op.holder_alpha(), op.holder_C(), oc.holder_C1);
  }
  if (oc.kind == "pucci_plus" || oc.kind == "pucci_minus") {
    OperatorSpec op = oc.kind == "pucci_plus" ? OperatorSpec::pucci_plus(dim, oc.lambda0, oc.lambda1)
                                              : OperatorSpec::pucci_minus(dim, oc.lambda0, oc.lambda1);
    return op.with_holder(op.holder_alpha(), op.holder_C(), oc.holder_C1);
  }
  if (oc.kind == "trace_linear") {
    std::vector<Expression> e;
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) e.push_back(Expression::parse(oc.A[r][c], constants));
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < r; ++c)
        if (oc.A[r][c] != oc.A[c][r]) throw ValidationError("coefficient matrix A must be symmetric");
    auto at = [e, dim](const Point& x) {
      Hessian H(dim);
      for (int r = 0; r < dim; ++r)
        for (int c = r; c < dim; ++c) H.set(r, c, e[r * dim + c].eval(x));
      return H;
    };
    if (oc.A_constant) {
      OperatorSpec op = OperatorSpec::trace_linear(at(Point{}));
      return op.with_holder(op.holder_alpha(), op.holder_C(), oc.holder_C1);
    }
    OperatorSpec op = OperatorSpec::trace_linear(dim, at, oc.lambda0, oc.lambda1, *oc.holder_alpha, *oc.holder_C);
    return op.with_holder(*oc.holder_alpha, *oc.holder_C, oc.holder_C1);
  }
  if (oc.kind == "bellman_sup") {
    std::vector<OperatorSpec> m;
    for (const auto& mc : oc.members) m.push_back(build_operator(mc, dim, constants));
    OperatorSpec op = OperatorSpec::bellman_sup(std::move(m));
    return op.with_holder(op.holder_alpha(), op.holder_C(), oc.holder_C1);
  }
  throw ValidationError("unknown operator kind " + oc.kind);
}

ScalarField build_field(const RunConfig& cfg, const FieldSource& src, const Grid& grid, const char* what) {
  if (src.is_file()) {
    std::filesystem::path p = src.file;
    if (p.is_relative() && !cfg.source.empty()) p = cfg.source.parent_path() / p;
    ScalarField f = load_field(p);
    if (!(f.grid() == grid)) {
      throw ValidationError(std::string(what) + " file " + p.string() + " is on a different grid than problem.grid");
    }
    return f;
  }
  const Expression e = Expression::parse(src.expr, cfg.constants);
  std::vector<double> v(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    v[k] = e.eval(grid.node(k));
    if (!std::isfinite(v[k])) {
      const Point x = grid.node(k);
      std::ostringstream os;
      os << what << " = \"" << src.expr << "\" is not finite at node " << k << " (x1=" << x[0];
      if (grid.dim() > 1) os << ", x2=" << x[1];
      if (grid.dim() > 2) os << ", x3=" << x[2];
      os << ")";
      throw ValidationError(os.str());
    }
  }
  return ScalarField(grid, std::move(v));
}

ProblemSpec build_problem(const RunConfig& cfg) {
  const Grid grid = config_grid(cfg);
  OperatorSpec op = build_operator(cfg.op, grid.dim(), cfg.constants).with_domain(grid.lo_vector(), grid.hi_vector());
  ScalarField phi1 = build_field(cfg, cfg.phi1, grid, "problem.phi1");
  ScalarField phi2 = build_field(cfg, cfg.phi2, grid, "problem.phi2");
  ScalarField g = build_field(cfg, cfg.g, grid, "problem.g");
  std::optional<ScalarField> f;
  if (cfg.f) f = build_field(cfg, *cfg.f, grid, "problem.f");
  return ProblemSpec::with_boundary_field(std::move(op), std::move(phi1), std::move(phi2), g, std::move(f),
                                          cfg.form);
}

std::vector<double> build_schedule(const RunConfig& cfg, const Grid& grid) {
  if (!cfg.solver.schedule.empty()) return cfg.solver.schedule;
  double e = cfg.solver.eps0 ? *cfg.solver.eps0 : std::max(grid.max_h(), 0.1);
  std::vector<double> s;
  for (int k = 0; k < cfg.solver.stages; ++k, e *= cfg.solver.factor) s.push_back(e);
  return s;
}

}  // namespace olab
