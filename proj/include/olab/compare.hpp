#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace olab {

struct CompareTolerances {
  double field_abs = 1e-8;   // max |u_a - u_b|
  double report_rel = 1e-6;  // numeric leaves of the JSON reports, relative to max(1, |a|)
};

struct FieldDiff {
  std::string stem;
  double max_abs = 0.0;
  double l2 = 0.0;  // sqrt(sum d^2 prod h)
};

struct ReportDiff {
  std::string file;
  std::string path;  // JSON pointer of the leaf
  std::string detail;
};

struct CompareResult {
  std::vector<FieldDiff> fields;
  std::vector<ReportDiff> reports;      // leaves beyond tolerance or structural mismatches
  std::vector<std::string> identical;   // artifacts with equal bytes
  std::vector<std::string> differing;   // artifacts whose bytes differ
  std::vector<std::string> missing;     // present in only one run
  bool pass = true;

  nlohmann::json to_json() const;
};

// Compares two output directories artifact by artifact (manifest.json is
// skipped). Throws ValidationError when a directory is missing or the stored
// solutions live on different grids.
CompareResult compare_runs(const std::filesystem::path& a, const std::filesystem::path& b,
                           const CompareTolerances& tol = {});

}  // namespace olab
