#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "olab/error.hpp"
#include "olab/fbanalysis.hpp"
#include "olab/geometry.hpp"
#include "olab/oracle.hpp"
#include "olab/problem.hpp"

using namespace olab;

namespace {

Grid square(int n, double a = 1.0) {
  const std::vector<double> l{-a, -a}, h{a, a};
  const std::vector<int> c{n, n};
  return Grid::build(l, h, c);
}

double pos(double v) { return v > 0 ? v : 0; }

ScalarField halfspace(const Grid& g, double c, Point nu = {0, 1, 0}) {
  return ScalarField::sample(g, [=](const Point& p) {
    const double s = p[0] * nu[0] + p[1] * nu[1] + p[2] * nu[2];
    return 0.5 * c * pos(s) * pos(s);
  });
}

std::size_t origin(const Grid& g) {
  Index i{};
  for (int a = 0; a < g.dim(); ++a) i[a] = (g.count(a) - 1) / 2;
  return g.flat(i);
}

double radial_exact(const Point& p) {
  const double R0 = 0.5, r = std::hypot(p[0], p[1]);
  if (r <= R0) return 0;
  return (r * r - R0 * R0) / 4 - (R0 * R0 / 2) * std::log(r / R0);
}

// Width by brute force over 20000 directions; an upper bound on the exact
// value that converges to it.
double scan_width(const std::vector<Point2>& pts) {
  double best = INFINITY;
  for (int i = 0; i < 20000; ++i) {
    const double t = M_PI * i / 20000.0, cx = std::cos(t), cy = std::sin(t);
    double lo = INFINITY, hi = -INFINITY;
    for (const Point2& p : pts) {
      const double s = p.x * cx + p.y * cy;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    best = std::min(best, hi - lo);
  }
  return best;
}

}  // namespace

TEST_CASE("coincidence sets of a half-space solution") {
  const Grid g = square(33);
  const ScalarField u = halfspace(g, 1.0);
  const ScalarField psi = ScalarField::constant(g, 10.0);
  const SetDecomposition s = coincidence_sets(u, psi, 1e-12);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Index i = g.unflat(k);
    if (g.on_boundary(k)) {
      CHECK(!s.lambda_u[k]);
      CHECK(!s.omega_u[k]);
      continue;
    }
    const double y = g.node(k)[1];
    // The y = 0 row has central gradient h/4, above tol/h.
    CHECK(bool(s.lambda_u[k]) == (y < -1e-12));
    CHECK(bool(s.lambda_u[k]) != bool(s.omega_u[k]));
    CHECK(bool(s.gamma_u[k]) == (i[1] == 15));
  }
  CHECK(SetDecomposition::count(s.gamma_psi) == 0);
  CHECK(SetDecomposition::count(s.gamma_d) == 0);
}

TEST_CASE("coincidence sets of u = psi = 0") {
  const Grid g = square(17);
  const ScalarField z = ScalarField::constant(g, 0.0);
  const SetDecomposition s = coincidence_sets(z, z, 1e-10);
  CHECK(SetDecomposition::count(s.lambda_u) == 15 * 15);
  CHECK(SetDecomposition::count(s.gamma_u) == 0);
  CHECK(SetDecomposition::count(s.omega_u) == 0);
  CHECK_THROWS_AS(coincidence_sets(z, z, 0.0), ValidationError);
}

TEST_CASE("thickness examples") {
  const Grid g = square(65);
  const double h = g.h(0);
  NodeMask lower(g.size()), one(g.size()), seg(g.size());
  const std::size_t o = origin(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point p = g.node(k);
    lower[k] = p[1] <= 1e-12;
    seg[k] = std::abs(p[1]) < 1e-12;
  }
  one[o] = 1;
  for (double r : {0.25, 0.5}) {
    const ThicknessValue t = thickness(lower, g, Point{}, r);
    CHECK(std::abs(t.delta - 1.0) <= h / r);
    const ThicknessValue s = thickness(one, g, Point{}, r);
    CHECK(s.md == 0.0);
    CHECK(s.delta == 0.0);
    const ThicknessValue c = thickness(seg, g, Point{}, r);
    CHECK(c.md <= h);
    CHECK(c.delta <= h / r);
  }
  CHECK_THROWS_AS(thickness(lower, g, Point{}, h), ValidationError);
}

TEST_CASE("rotating calipers agree with a direction scan") {
  SampleRng rng(31);
  for (int s = 0; s < 30; ++s) {
    std::vector<Point2> pts;
    const int n = 3 + static_cast<int>(rng.uniform() * 40);
    const double ax = rng.uniform(0.2, 2), ay = rng.uniform(0.2, 2), th = rng.uniform(0, M_PI);
    for (int i = 0; i < n; ++i) {
      const double x = ax * rng.uniform(-1, 1), y = ay * rng.uniform(-1, 1);
      pts.push_back({x * std::cos(th) - y * std::sin(th), x * std::sin(th) + y * std::cos(th)});
    }
    const double w = hull_width(convex_hull(pts));
    const double b = scan_width(pts);
    CHECK(w <= b + 1e-12);
    // The nearest scanned angle is within pi/40000 of the optimum, which
    // costs at most diam * pi / 40000 in width.
    const double diam = 2 * std::hypot(ax, ay);
    CHECK(w >= b - diam * M_PI / 40000);
  }
}

TEST_CASE("3D width matches the planar width of a flat set and of a box") {
  SampleRng rng(2);
  std::vector<Point> pts;
  std::vector<Point2> flat;
  for (int i = 0; i < 60; ++i) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-0.3, 0.3);
    pts.push_back(Point{x, y, 0.0});
    flat.push_back({x, y});
  }
  CHECK(minimal_width(pts, 3) <= 1e-9);
  CHECK(minimal_width(pts, 2) == doctest::Approx(hull_width(convex_hull(flat))));
  std::vector<Point> box;
  for (double x : {-1.0, 1.0})
    for (double y : {-0.7, 0.7})
      for (double z : {-0.2, 0.2}) box.push_back(Point{x, y, z});
  const double w = minimal_width(box, 3);
  CHECK(w >= 0.4 - 1e-12);
  CHECK(w <= 0.4 + 2.0 * (1 - std::cos(M_PI / 180)) * 2.5);
}

TEST_CASE("thickness stays in [0, 2] and grows with the mask") {
  const Grid g = square(33);
  SampleRng rng(77);
  for (int s = 0; s < 40; ++s) {
    NodeMask a(g.size()), b(g.size());
    const double p = rng.uniform(0.01, 0.5);
    for (std::size_t k = 0; k < g.size(); ++k) {
      a[k] = rng.uniform() < p;
      b[k] = a[k] || rng.uniform() < 0.1;
    }
    const Point c{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0};
    const double r = rng.uniform(0.15, 0.6);
    const ThicknessValue ta = thickness(a, g, c, r), tb = thickness(b, g, c, r);
    CHECK(ta.delta >= 0.0);
    CHECK(ta.delta <= 2.0);
    CHECK(tb.md >= ta.md - 1e-12);
  }
}

TEST_CASE("rescaling is exact on homogeneous fields") {
  const Grid g = square(65);
  const Grid out = square(17);
  const ScalarField u = halfspace(g, 1.0);
  for (double rho : {0.25, 0.5, 1.0}) {
    const ScalarField r = rescale(u, Point{}, rho, out);
    const ScalarField want = halfspace(out, 1.0);
    for (std::size_t k = 0; k < out.size(); ++k) CHECK(r[k] == doctest::Approx(want[k]).epsilon(1e-12));
  }
  const ScalarField q = ScalarField::sample(g, [](const Point& p) { return p[0] * p[0] + p[1] * p[1]; });
  const ScalarField r = rescale(q, Point{}, 0.5, out);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const Point p = out.node(k);
    CHECK(r[k] == doctest::Approx(p[0] * p[0] + p[1] * p[1]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(rescale(q, Point{0.9, 0, 0}, 0.5, out), DomainError);
}

TEST_CASE("rescalings of the radial solution form a Cauchy sequence") {
  const Grid g = square(257);
  const ScalarField u = ScalarField::sample(g, radial_exact);
  // The node of the free boundary on the positive y axis.
  const std::size_t x0 = g.flat(Index{128, 128 + 64, 0});
  const Grid out = square(33);
  std::vector<ScalarField> r;
  for (double rho : {0.2, 0.1, 0.05}) r.push_back(rescale(u, g.node(x0), rho, out));
  double d01 = 0, d12 = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    d01 = std::max(d01, std::abs(r[0][k] - r[1][k]));
    d12 = std::max(d12, std::abs(r[1][k] - r[2][k]));
  }
  CHECK(d12 < d01);
}

TEST_CASE("half-space fits") {
  const Grid g = square(41);
  const HalfspaceFit f1 = fit_halfspace(halfspace(g, 1.0));
  CHECK(f1.c == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(f1.nu[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(f1.residual <= 1e-10);

  const HalfspaceFit f2 = fit_halfspace(halfspace(g, 2.0));
  CHECK(f2.c == doctest::Approx(2.0).epsilon(1e-10));

  const Point nu0{M_SQRT1_2, M_SQRT1_2, 0};
  const HalfspaceFit f3 = fit_halfspace(halfspace(g, 1.0, nu0));
  CHECK(std::abs(f3.nu[0] - nu0[0]) <= 1e-6);
  CHECK(std::abs(f3.nu[1] - nu0[1]) <= 1e-6);
  CHECK(f3.c == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(norm(f3.nu, 2) == doctest::Approx(1.0).epsilon(1e-12));

  // Off-diagonal normal on a coarse box: the corner gradients are one-sided.
  const Point nu1{0.6, 0.8, 0};
  const HalfspaceFit f4 = fit_halfspace(halfspace(square(17), 3.0, nu1));
  CHECK(std::abs(f4.c - 3.0) <= 1e-9);
  CHECK(std::abs(f4.nu[0] - 0.6) <= 1e-9);
  CHECK(f4.residual <= 1e-9);

  CHECK_THROWS_WITH_AS(fit_halfspace(ScalarField::constant(g, 0.0)), doctest::Contains("no positivity to fit"),
                       ValidationError);
}

TEST_CASE("growth ratios") {
  const Grid g = square(129);
  const std::vector<double> radii{0.0625, 0.125, 0.25};
  const GrowthReport r = growth_report(halfspace(g, 1.0), origin(g), radii);
  for (double q : r.sup_over_r2) CHECK(q == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.spread() <= 1e-12);
  const GrowthReport z = growth_report(ScalarField::constant(g, 0.0), origin(g), radii);
  for (double q : z.sup_over_r2) CHECK(q == 0.0);
  CHECK(z.spread() == 0.0);
  CHECK_THROWS_AS(growth_report(halfspace(g, 1.0), origin(g), {g.h(0)}), ValidationError);
  CHECK_THROWS_AS(growth_report(halfspace(g, 1.0), g.flat(Index{2, 64, 0}), {0.25}), DomainError);
}

TEST_CASE("growth at the tangent contact point of the oracle solution") {
  const std::vector<double> l{-1}, h{1};
  const std::vector<int> c{513};
  const Grid g = Grid::build(l, h, c);
  const ProblemSpec P(OperatorSpec::laplacian(1),
                      ScalarField::sample(g, [](const Point& p) { return 0.5 - 2 * p[0] * p[0]; }),
                      ScalarField::constant(g, 1.0), {0.0, 0.0}, std::nullopt, ProblemForm::General);
  const ProblemSpec R = reduce_problem(P);
  const PdasResult pd = solve_pdas(R);
  const SetDecomposition s = coincidence_sets(pd.u, R.phi2(), 1e-9);
  std::size_t left = g.size();
  for (std::size_t k = 0; k < g.size(); ++k)
    if (s.gamma_u[k]) {
      left = k;
      break;
    }
  REQUIRE(left < g.size());
  const double t = 1 - std::sqrt(3) / 2;
  CHECK(std::abs(g.node(left)[0] + t) <= 2 * g.h(0));
  // Dyadic r from 4h up to half the distance to the boundary.
  std::vector<double> radii;
  for (double r = 4 * g.h(0); r <= 0.5 * (1 - t) + 1e-12; r *= 2) radii.push_back(r);
  const GrowthReport r = growth_report(pd.u, left, radii);
  // Left of the contact point the reduced solution is 2 (x + t)^2, so from a
  // node delta inside the contact set S(r) / r^2 = 2 (1 - delta / r)^2.
  const double delta = g.node(left)[0] + t;
  CHECK(delta >= 0);
  double lo = INFINITY, hi = 0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double q = r.sup_over_r2[i], e = 2 * (1 - delta / radii[i]) * (1 - delta / radii[i]);
    CHECK(std::isfinite(q));
    CHECK(std::abs(q - e) <= 0.05);
    if (radii[i] >= 16 * g.h(0)) lo = std::min(lo, q), hi = std::max(hi, q);
  }
  CHECK((hi - lo) / hi < 0.3);
}

TEST_CASE("nondegeneracy") {
  const Grid g = square(65);
  const ScalarField u = halfspace(g, 1.0);
  const SetDecomposition s = coincidence_sets(u, ScalarField::constant(g, 10.0), 1e-12);
  const std::vector<double> radii{0.125, 0.25};
  const NondegeneracyReport ok = nondegeneracy_check(u, s, OperatorSpec::laplacian(2), 1.0, radii);
  CHECK(ok.pass());
  CHECK(ok.points_tested > 0);
  CHECK(ok.constant == doctest::Approx(1.0 / 16));

  const ScalarField z = ScalarField::constant(g, 0.0);
  SetDecomposition forced = coincidence_sets(z, ScalarField::constant(g, 10.0), 1e-12);
  const std::size_t o = origin(g);
  forced.lambda_u[o] = 0;
  forced.omega_u[o] = 1;
  const NondegeneracyReport bad = nondegeneracy_check(z, forced, OperatorSpec::laplacian(2), 1.0, radii);
  CHECK_FALSE(bad.pass());
  bool listed = false;
  for (const auto& f : bad.failures) listed = listed || f.node == o;
  CHECK(listed);
}

TEST_CASE("directional monotonicity") {
  const Grid g = square(65);
  const std::size_t o = origin(g);
  const ScalarField u = halfspace(g, 1.0);
  for (double d : {0.25, 0.5, 1.0}) {
    const MonotonicityReport m = monotonicity_check(u, d, o, 0.25, 64, Point{0, 1, 0}, 3);
    CHECK(m.pass);
    CHECK(m.min_directional_derivative >= -1e-12);
    CHECK(m.nodes_tested > 0);
  }
  const ScalarField v = ScalarField::sample(g, [](const Point& p) { return -p[0]; });
  const MonotonicityReport bad = monotonicity_check(v, 1.0, o, 0.25, 64, Point{0, 1, 0}, 3);
  CHECK_FALSE(bad.pass);
  CHECK(bad.min_directional_derivative < 0);
  CHECK(bad.slack == doctest::Approx(5 * g.h(0) * v.max_abs()));
}

TEST_CASE("cone directions satisfy the cone condition") {
  for (int dim : {2, 3}) {
    for (double d : {0.25, 0.5, 1.0}) {
      const Point axis = dim == 2 ? Point{0.6, 0.8, 0} : Point{0, 0.6, 0.8};
      const std::vector<Point> e = cone_directions(dim, axis, d, 64, 5);
      CHECK(e.size() == 64);
      for (const Point& v : e) {
        CHECK(norm(v, dim) == doctest::Approx(1.0).epsilon(1e-12));
        const double a = dot(v, axis, dim);
        Point perp = v;
        for (int i = 0; i < dim; ++i) perp[i] -= a * axis[i];
        CHECK(a > d * norm(perp, dim) - 1e-12);
      }
      const std::vector<Point> again = cone_directions(dim, axis, d, 64, 5);
      CHECK(again[10][0] == e[10][0]);
    }
  }
}

TEST_CASE("blowup classification on exact fields") {
  const Grid g = square(65);
  const std::size_t o = origin(g);
  const std::vector<double> rhos{0.5, 0.25};
  // u = (1/2)(x2+)^2 under psi = (x2+)^2
  // Between h^2 / 4 and h^2 the origin row is the only gamma_u row.
  BlowupParams tight;
  tight.set_tol = 0.5 * g.h(0) * g.h(0);
  const BlowupReport a = classify_blowup(halfspace(g, 1.0), halfspace(g, 2.0), o, rhos, tight);
  CHECK(a.verdict == BlowupVerdict::Halfspace);
  CHECK(std::abs(a.c - 1.0) <= 1e-6);
  CHECK(std::abs(a.a - 2.0) <= 1e-6);
  CHECK(a.in_gamma);
  CHECK(a.thickness_ok);

  // u = psi = (x2+)^2: the (a/2)(x2+)^2 branch
  const BlowupReport b = classify_blowup(halfspace(g, 2.0), halfspace(g, 2.0), o, rhos, tight);
  CHECK(b.verdict == BlowupVerdict::Halfspace);
  CHECK(std::abs(b.c - 2.0) <= 1e-6);
  CHECK(std::abs(b.a - 2.0) <= 1e-6);
  CHECK(b.branch.find("upper") != std::string::npos);

  // Source scale f / F(nu nu) = 1 for the Laplacian with f = 1.
  BlowupParams prm = tight;
  const OperatorSpec lap = OperatorSpec::laplacian(2);
  prm.op = &lap;
  prm.source_value = 1.0;
  const BlowupReport c = classify_blowup(halfspace(g, 1.0), halfspace(g, 2.0), o, rhos, prm);
  REQUIRE(c.source_scale);
  CHECK(*c.source_scale == doctest::Approx(1.0));
  CHECK(c.branch == "source");
}

TEST_CASE("blowup of a thin coincidence set is inconclusive") {
  const Grid g = square(65);
  const std::size_t o = origin(g);
  const ScalarField u = ScalarField::sample(g, [](const Point& p) { return 0.5 * p[1] * p[1]; });
  BlowupParams prm;
  prm.set_tol = 1e-12;
  const BlowupReport r = classify_blowup(u, ScalarField::constant(g, 10.0), o, {0.5, 0.25}, prm);
  CHECK_FALSE(r.thickness_ok);
  CHECK(r.verdict == BlowupVerdict::Inconclusive);
  CHECK_THROWS_AS(classify_blowup(u, u, o, {0.25, 0.5}), ValidationError);
  CHECK_THROWS_AS(classify_blowup(u, u, o, {g.h(0)}), ValidationError);
}

TEST_CASE("free-boundary graph of the radial solution") {
  const Grid g = square(129);
  const ScalarField u = ScalarField::sample(g, radial_exact);
  const ScalarField psi = ScalarField::sample(g, [](const Point& p) { return 1 + p[0] * p[0] + p[1] * p[1]; });
  const SetDecomposition s = coincidence_sets(u, psi, g.h(0) * g.h(0) * u.max_abs());
  const FBGraph fb = extract_fb_graph(u, s, 1, Point{0, 0.5, 0}, {0.25, 0.125, 0.0625});
  CHECK(fb.unresolved == 0);
  std::size_t resolved = 0;
  for (const GraphSample& p : fb.samples) {
    if (!p.resolved) continue;
    ++resolved;
    CHECK(std::abs(p.height - std::sqrt(0.25 - p.xprime[0] * p.xprime[0])) <= 2 * g.h(0));
    if (p.has_normal) CHECK(norm(p.nu, 2) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(resolved > 10);
  REQUIRE(fb.normal_variation.size() == 3);
  for (std::size_t i = 1; i < fb.normal_variation.size(); ++i)
    CHECK(fb.normal_variation[i].second <= fb.normal_variation[i - 1].second);
  for (const auto& [r, l] : fb.lipschitz_local) CHECK(l >= 0.0);
  CHECK_THROWS_AS(extract_fb_graph(u, s, 1, Point{-0.9, -0.9, 0}, {0.0625}), ValidationError);
}
