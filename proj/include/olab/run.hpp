#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "olab/config.hpp"

namespace olab {

inline constexpr const char* kVersion = "1.0.0";

// Process exit codes shared by the CLI and the C API.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitValidation = 2,
  kExitDivergence = 3,
  kExitDiagnosticFailure = 4,
};

struct RunOverrides {
  std::optional<std::filesystem::path> output_dir;
  std::optional<SolverKind> solver;
  int grid_scale = 1;
  std::optional<std::uint64_t> seed;
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string status;  // ok | diverged | diagnostic_failure
  std::string message;
  std::filesystem::path output_dir;
  std::vector<std::string> artifacts;  // file names relative to output_dir
  std::vector<std::string> failed_diagnostics;
};

// Applies the overrides (grid scale, solver, seed, output directory).
RunConfig resolve_config(RunConfig cfg, const RunOverrides& ov);

// Solves, writes solution.{json,bin[,csv]}, solve_report.json, one
// <diagnostic>.json per requested diagnostic (plus growth.csv and
// fbgraph.csv) and manifest.json. Divergence writes the best iterate and a
// report marked diverged, then returns kExitDivergence. Validation problems
// throw ValidationError.
RunOutcome run_solve(const RunConfig& cfg, const RunOverrides& ov = {});

// Reruns the diagnostics on the solution already stored in the output
// directory.
RunOutcome run_diagnose(const RunConfig& cfg, const RunOverrides& ov = {});

// Solves at grid scales 1, 2, 4 (times ov.grid_scale) into level_<k>/ and
// writes convergence.json: coarse-node differences, the observed order
// log2(e12 / e24) and the max second difference per level. Fails (exit 4)
// when the second difference grows by more than max_growth per refinement.
RunOutcome run_convergence(const RunConfig& cfg, const RunOverrides& ov = {}, double max_growth = 0.10);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace olab
