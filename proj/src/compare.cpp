#include "olab/compare.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "olab/error.hpp"
#include "olab/field_io.hpp"

namespace olab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative paths of regular files below dir, sorted.
std::set<std::string> list_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("not a directory: " + dir.string());
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (e.path().filename() == "manifest.json") continue;
    out.insert(rel);
  }
  return out;
}

bool is_field_meta(const std::string& rel, const std::set<std::string>& files) {
  if (rel.size() < 5 || rel.substr(rel.size() - 5) != ".json") return false;
  return files.count(rel.substr(0, rel.size() - 5) + ".bin") > 0;
}

void diff_json(const json& a, const json& b, const std::string& path, const std::string& file, double rel,
               std::vector<ReportDiff>& out) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    if (std::abs(x - y) > rel * std::max(1.0, std::max(std::abs(x), std::abs(y)))) {
      std::ostringstream ss;
      ss << format_real(x) << " vs " << format_real(y);
      out.push_back({file, path, ss.str()});
    }
    return;
  }
  if (a.type() != b.type()) {
    out.push_back({file, path, std::string("type ") + a.type_name() + " vs " + b.type_name()});
    return;
  }
  if (a.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      const std::string p = path + "/" + it.key();
      if (!b.contains(it.key())) out.push_back({file, p, "missing in second run"});
      else diff_json(*it, b[it.key()], p, file, rel, out);
    }
    for (auto it = b.begin(); it != b.end(); ++it)
      if (!a.contains(it.key())) out.push_back({file, path + "/" + it.key(), "missing in first run"});
  } else if (a.is_array()) {
    if (a.size() != b.size()) {
      out.push_back({file, path, "length " + std::to_string(a.size()) + " vs " + std::to_string(b.size())});
      return;
    }
    for (std::size_t i = 0; i < a.size(); ++i) diff_json(a[i], b[i], path + "/" + std::to_string(i), file, rel, out);
  } else if (a != b) {
    out.push_back({file, path, a.dump() + " vs " + b.dump()});
  }
}

}  // namespace

json CompareResult::to_json() const {
  json f = json::array();
  for (const FieldDiff& d : fields) f.push_back(json{{"stem", d.stem}, {"max_abs", d.max_abs}, {"l2", d.l2}});
  json r = json::array();
  for (const ReportDiff& d : reports) r.push_back(json{{"file", d.file}, {"path", d.path}, {"detail", d.detail}});
  return json{{"fields", f},
              {"report_differences", r},
              {"identical", identical},
              {"differing", differing},
              {"missing", missing},
              {"pass", pass}};
}

CompareResult compare_runs(const fs::path& a, const fs::path& b, const CompareTolerances& tol) {
  const std::set<std::string> fa = list_files(a), fb = list_files(b);
  CompareResult out;
  for (const std::string& n : fa)
    if (!fb.count(n)) out.missing.push_back(n);
  for (const std::string& n : fb)
    if (!fa.count(n)) out.missing.push_back(n);

  for (const std::string& rel : fa) {
    if (!fb.count(rel)) continue;
    const std::string ba = read_bytes(a / rel), bb = read_bytes(b / rel);
    (ba == bb ? out.identical : out.differing).push_back(rel);
    if (rel.size() > 4 && rel.substr(rel.size() - 4) == ".bin") {
      const std::string stem = rel.substr(0, rel.size() - 4);
      const ScalarField ua = load_field(a / stem), ub = load_field(b / stem);
      if (!(ua.grid() == ub.grid())) throw ValidationError(stem + ": the two runs use different grids");
      FieldDiff d{stem, 0.0, 0.0};
      double cell = 1.0;
      for (int ax = 0; ax < ua.grid().dim(); ++ax) cell *= ua.grid().h(ax);
      for (std::size_t k = 0; k < ua.size(); ++k) {
        const double e = std::abs(ua[k] - ub[k]);
        d.max_abs = std::max(d.max_abs, e);
        d.l2 += e * e;
      }
      d.l2 = std::sqrt(d.l2 * cell);
      out.pass = out.pass && d.max_abs <= tol.field_abs;
      out.fields.push_back(d);
    } else if (rel.size() > 5 && rel.substr(rel.size() - 5) == ".json" && !is_field_meta(rel, fa)) {
      json ja, jb;
      try {
        ja = json::parse(ba);
        jb = json::parse(bb);
      } catch (const json::exception& e) {
        throw ValidationError(rel + " is not valid JSON: " + e.what());
      }
      diff_json(ja, jb, "", rel, tol.report_rel, out.reports);
    }
  }
  if (!out.reports.empty() || !out.missing.empty()) out.pass = false;
  return out;
}

}  // namespace olab
