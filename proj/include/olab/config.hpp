#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "olab/fbanalysis.hpp"
#include "olab/oracle.hpp"
#include "olab/problem.hpp"
#include "olab/solver.hpp"

namespace olab {

enum class SolverKind { Penalty, Pdas };
const char* to_string(SolverKind k) noexcept;

// Either an expression over x1..x3 or a field file stem (relative to the
// config file's directory).
struct FieldSource {
  std::string expr;
  std::filesystem::path file;
  bool is_file() const noexcept { return !file.empty(); }
};

struct OperatorConfig {
  std::string kind;  // laplacian | trace_linear | pucci_plus | pucci_minus | bellman_sup
  double lambda0 = 1.0, lambda1 = 1.0;
  std::vector<std::vector<std::string>> A;  // trace_linear, row-major expressions
  bool A_constant = true;
  std::optional<double> holder_alpha, holder_C;
  double holder_C1 = 1.0;
  std::vector<OperatorConfig> members;  // bellman_sup
};

struct SolverConfig {
  SolverKind kind = SolverKind::Penalty;
  std::vector<double> schedule;  // empty: eps0/stages/factor below
  std::optional<double> eps0;    // default max(h, 0.1)
  int stages = 6;
  double factor = 0.25;
  PenaltyParams penalty;
  PdasParams pdas;
  bool reduce = false;  // solve reduce_problem(general) and add phi1 back
};

struct DiagnosticConfig {
  std::string name;
  nlohmann::json params;  // the whole object, name included
  std::string where;      // "config.json:17 (diagnostics[2])" for messages
};

struct RunConfig {
  std::filesystem::path source;  // config file, empty for in-memory configs
  std::string text;              // raw config text, hashed into the manifest
  std::string name;
  ProblemForm form = ProblemForm::General;
  std::vector<double> lo, hi;
  std::vector<int> counts;
  OperatorConfig op;
  std::map<std::string, double> constants;
  FieldSource phi1, phi2, g;
  std::optional<FieldSource> f;
  SolverConfig solver;
  double set_tol_factor = 10.0;  // membership tol = factor h^2 max|u|
  std::vector<DiagnosticConfig> diagnostics;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
};

inline constexpr const char* kDiagnosticNames[] = {"complementarity", "growth",       "nondegeneracy",
                                                    "thickness",       "monotonicity", "blowup",
                                                    "fbgraph"};

// Parses and validates. Errors are ValidationError with the file, line and
// field path of the offending entry.
RunConfig parse_config(const std::string& text, const std::filesystem::path& source = {});
RunConfig load_config(const std::filesystem::path& path);

// Counts refined by k per axis: (c - 1) k + 1, so coarse nodes persist.
// The eps schedule is continued until its last value has shrunk by k^2.
void apply_grid_scale(RunConfig& cfg, int k);

Grid config_grid(const RunConfig& cfg);
OperatorSpec build_operator(const OperatorConfig& oc, int dim,
                            const std::map<std::string, double>& constants = {});
// Throws DomainError/ValidationError for files on other grids.
ScalarField build_field(const RunConfig& cfg, const FieldSource& src, const Grid& grid, const char* what);
ProblemSpec build_problem(const RunConfig& cfg);
std::vector<double> build_schedule(const RunConfig& cfg, const Grid& grid);

}  // namespace olab
