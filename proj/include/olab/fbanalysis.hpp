#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "olab/grid.hpp"
#include "olab/operators.hpp"

namespace olab {

using NodeMask = std::vector<unsigned char>;

// Masks over the grid nodes of a reduced-form pair (u, psi). Boundary nodes
// belong to no set.
//   lambda_u   |u| <= tol and |grad u| <= tol / h
//   omega_u    interior nodes not in lambda_u
//   gamma_u    lambda_u nodes with a face neighbour in omega_u
//   contact_psi |u - psi| <= tol
//   gamma_psi  contact_psi nodes with a face neighbour in {u < psi}
//   gamma_d    gamma_u nodes with a gamma_psi node among their 3^n neighbours
struct SetDecomposition {
  Grid grid;
  double tol = 0.0;
  NodeMask lambda_u, omega_u, gamma_u, contact_psi, gamma_psi, gamma_d;

  static std::size_t count(const NodeMask& m);
};

// 10 h^2 max|u|, the default membership tolerance.
double default_set_tol(const ScalarField& u);

// Throws ValidationError if the grids differ or tol <= 0.
SetDecomposition coincidence_sets(const ScalarField& u, const ScalarField& psi, double tol);

struct ThicknessValue {
  double md = 0.0;
  double delta = 0.0;
};

// MD and MD / r of the mask nodes inside the closed ball B_r(center).
// Throws ValidationError for r < 2h.
ThicknessValue thickness(const NodeMask& mask, const Grid& grid, const Point& center, double r);

struct ThicknessReport {
  Point center{};
  std::vector<double> radii;
  std::vector<double> delta;
  std::vector<double> md;
};

ThicknessReport thickness_report(const NodeMask& mask, const Grid& grid, const Point& center,
                                 const std::vector<double>& radii);

// u_rho(x) = (u(x0 + rho x) - u(x0)) / rho^2 on out_grid. Throws DomainError
// if the mapped box leaves u's grid.
ScalarField rescale(const ScalarField& u, const Point& x0, double rho, const Grid& out_grid);

struct HalfspaceFit {
  Point nu{};
  double c = 0.0;
  double residual = 0.0;  // max |u0 - (c/2)((x.nu)+)^2| / max u0 over the unit ball
};

// Fits (c/2)((x.nu)+)^2 to a field on a box centred at 0. Throws
// ValidationError("no positivity to fit") when u0 <= 0 everywhere.
HalfspaceFit fit_halfspace(const ScalarField& u0);

struct GrowthReport {
  std::size_t point = 0;
  std::vector<double> radii;
  std::vector<double> sup_over_r2;
  double c0_estimate = 0.0;

  // (max - min) / max of sup_over_r2; 0 when all ratios vanish.
  double spread() const;
};

// S(r) = max of u over nodes in B_r(point). Throws DomainError when a ball
// leaves the box and ValidationError for radii below 4h.
GrowthReport growth_report(const ScalarField& u, std::size_t fb_point, const std::vector<double>& radii);

struct NondegeneracyFailure {
  std::size_t node = 0;
  double r = 0.0;
  double shell_max = 0.0;
  double required = 0.0;  // u(x) + (c0 / (8 lambda1 n)) r^2 (1 - slack)
};

struct NondegeneracyReport {
  double constant = 0.0;  // c0 / (8 lambda1 n)
  double slack = 0.0;
  std::vector<double> radii;
  std::int64_t points_tested = 0;
  std::int64_t checks = 0;
  std::vector<NondegeneracyFailure> failures;
  bool pass() const noexcept { return failures.empty(); }
};

// Checks sup over the shell {r - h <= |y - x| <= r} of u >= u(x) + constant
// r^2 (1 - slack) for x in the closure of omega_u away from {u = psi}, with
// B_r(x) inside the box. At most max_points centres are used, taken at a
// fixed stride.
NondegeneracyReport nondegeneracy_check(const ScalarField& u, const SetDecomposition& sets,
                                        const OperatorSpec& op, double c0,
                                        const std::vector<double>& radii, double slack = 0.2,
                                        std::size_t max_points = 400);

struct MonotonicityReport {
  double delta = 0.0;
  double region_radius = 0.0;
  Point axis{};
  std::int64_t directions_tested = 0;
  std::int64_t nodes_tested = 0;
  double min_directional_derivative = 0.0;
  double slack = 0.0;  // tau(h)
  bool pass = false;
};

// Unit directions e with e.axis > delta |e - (e.axis) axis|, from a
// low-discrepancy sequence on the cap shifted by `seed`.
std::vector<Point> cone_directions(int dim, const Point& axis, double delta, int n_directions,
                                   std::uint64_t seed);

// slack <= 0 selects tau(h) = 5 h max|u|.
MonotonicityReport monotonicity_check(const ScalarField& u, double delta, std::size_t center,
                                      double radius, int n_directions, const Point& axis,
                                      std::uint64_t seed = 0, double slack = -1.0);

struct GraphSample {
  Point xprime{};  // transverse coordinates, the axis component is 0
  double height = 0.0;
  bool resolved = false;
  Point nu{};      // unit normal pointing into omega_u, when resolved
  bool has_normal = false;
};

struct FBGraph {
  int axis = 0;
  Point center{};
  std::vector<GraphSample> samples;
  std::vector<std::pair<double, double>> lipschitz_local;   // (window radius, estimate)
  std::vector<std::pair<double, double>> normal_variation;  // (r, max |nu_z - nu_0|)
  Point nu0{};
  std::size_t unresolved = 0;
};

// Gamma(u) near `center` as a graph over the hyperplane normal to `axis`.
// Only gamma nodes inside B_R(center), R = max radius, are used; a column
// whose nodes there are not one contiguous band is unresolved. Heights are
// the zero of the line through sqrt(u) at the first two omega nodes past the
// band with u >= default_set_tol(u) (at most 4 nodes out), kept between the first omega node and 3 spacings past the far end of
// the band. Throws ValidationError when no gamma node is in the window.
FBGraph extract_fb_graph(const ScalarField& u, const SetDecomposition& sets, int axis,
                         const Point& center, const std::vector<double>& radii);

enum class BlowupVerdict { Halfspace, UpperObstacle, Inconclusive };
const char* to_string(BlowupVerdict v) noexcept;

struct BlowupParams {
  double fit_tol = 0.05;
  double eps0 = 0.1;         // thickness gate
  int max_half_nodes = 64;   // out grid has 2K+1 nodes per axis, K <= this
  double set_tol = -1.0;     // <= 0 selects default_set_tol(u)
  // When set, source_scale = f(x0) / F(nu (x) nu, x0) with the fitted nu.
  const OperatorSpec* op = nullptr;
  std::optional<double> source_value;
};

struct BlowupReport {
  std::vector<double> rhos;  // as used, snapped to multiples of h
  std::vector<HalfspaceFit> fits_u;
  std::vector<std::optional<HalfspaceFit>> fits_psi;  // empty where psi_rho <= 0
  ThicknessReport thickness_trace;
  BlowupVerdict verdict = BlowupVerdict::Inconclusive;
  double c = 0.0;  // fitted coefficient behind the verdict
  double a = 0.0;  // psi coefficient at the smallest rho, 0 if unfitted
  std::optional<double> source_scale;
  std::string branch;  // "source", "upper" or "" when neither matches
  bool in_gamma = false;
  bool in_gamma_d = false;
  bool thickness_ok = false;
};

BlowupReport classify_blowup(const ScalarField& u, const ScalarField& psi, std::size_t x0,
                             const std::vector<double>& rhos, const BlowupParams& params = {});

}  // namespace olab
