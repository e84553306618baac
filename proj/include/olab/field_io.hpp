#pragma once

#include <filesystem>
#include <string>

#include "olab/grid.hpp"

namespace olab {

// A field on disk is a pair of files sharing a stem:
//   <stem>.json  {"dim", "lo", "hi", "counts", "dtype": "f64le", "order": "row-major"}
//   <stem>.bin   product(counts) little-endian IEEE doubles, row-major
void save_field(const ScalarField& field, const std::filesystem::path& stem);
ScalarField load_field(const std::filesystem::path& stem);

// One row per node: i0[,i1[,i2]],x0[,x1[,x2]],value. Values use 17 significant
// digits so the file round-trips.
void write_field_csv(const ScalarField& field, const std::filesystem::path& path);

// Shortest-form formatting used by every text artifact, so reruns are
// byte-identical.
std::string format_real(double v);

}  // namespace olab
