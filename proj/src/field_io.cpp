#include "olab/field_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "olab/error.hpp"

namespace olab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void save_field(const ScalarField& field, const fs::path& stem) {
  const Grid& g = field.grid();
  json hdr;
  hdr["dim"] = g.dim();
  hdr["lo"] = g.lo_vector();
  hdr["hi"] = g.hi_vector();
  hdr["counts"] = g.count_vector();
  hdr["dtype"] = "f64le";
  hdr["order"] = "row-major";
  {
    std::ofstream out(with_ext(stem, ".json"), std::ios::binary);
    if (!out) throw Error("cannot write " + with_ext(stem, ".json").string());
    out << hdr.dump(2) << '\n';
  }
  std::ofstream out(with_ext(stem, ".bin"), std::ios::binary);
  if (!out) throw Error("cannot write " + with_ext(stem, ".bin").string());
  std::vector<std::uint64_t> raw(field.size());
  const auto vals = field.values();
  for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = to_le(std::bit_cast<std::uint64_t>(vals[k]));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (!out) throw Error("short write on " + with_ext(stem, ".bin").string());
}

ScalarField load_field(const fs::path& stem) {
  const fs::path hp = with_ext(stem, ".json");
  std::ifstream hin(hp);
  if (!hin) throw ValidationError("field header not found: " + hp.string());
  json hdr;
  try {
    hin >> hdr;
  } catch (const json::exception& e) {
    throw ValidationError("field header " + hp.string() + " is not valid JSON: " + e.what());
  }
  std::vector<double> lo, hi;
  std::vector<int> counts;
  try {
    lo = hdr.at("lo").get<std::vector<double>>();
    hi = hdr.at("hi").get<std::vector<double>>();
    counts = hdr.at("counts").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ValidationError("field header " + hp.string() + ": " + e.what());
  }
  if (hdr.contains("dtype") && hdr["dtype"] != "f64le") {
    throw ValidationError("field header " + hp.string() + ": unsupported dtype");
  }
  Grid g = Grid::build(lo, hi, counts);
  const fs::path bp = with_ext(stem, ".bin");
  std::ifstream bin(bp, std::ios::binary);
  if (!bin) throw ValidationError("field data not found: " + bp.string());
  std::vector<std::uint64_t> raw(g.size());
  bin.read(reinterpret_cast<char*>(raw.data()),
           static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (bin.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t))) {
    throw ValidationError("field data " + bp.string() + " is shorter than the header declares");
  }
  std::vector<double> v(raw.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::bit_cast<double>(to_le(raw[k]));
  return ScalarField(std::move(g), std::move(v));
}

void write_field_csv(const ScalarField& field, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const Grid& g = field.grid();
  const int n = g.dim();
  for (int a = 0; a < n; ++a) out << 'i' << a << ',';
  for (int a = 0; a < n; ++a) out << 'x' << a << ',';
  out << "value\n";
  for (std::size_t k = 0; k < field.size(); ++k) {
    const Index idx = g.unflat(k);
    const Point p = g.node(idx);
    for (int a = 0; a < n; ++a) out << idx[a] << ',';
    for (int a = 0; a < n; ++a) out << format_real(p[a]) << ',';
    out << format_real(field[k]) << '\n';
  }
}

}  // namespace olab
