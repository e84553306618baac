#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "olab/error.hpp"
#include "olab/oracle.hpp"
#include "olab/solver.hpp"

using namespace olab;

namespace {

Grid line(int n) {
  const std::vector<double> l{-1}, h{1};
  const std::vector<int> c{n};
  return Grid::build(l, h, c);
}

using Fn = std::function<double(double)>;

ProblemSpec problem1d(int n, const Fn& p1, const Fn& p2, double ga, double gb) {
  const Grid g = line(n);
  return ProblemSpec(OperatorSpec::laplacian(1), ScalarField::sample(g, [&](const Point& p) { return p1(p[0]); }),
                     ScalarField::sample(g, [&](const Point& p) { return p2(p[0]); }), {ga, gb}, std::nullopt,
                     ProblemForm::General);
}

// Substitutes the arcs into the conditions of the 1D problem with u'' as the
// operator and f = 0: free arcs are affine and stay between the obstacles,
// contact arcs coincide with their obstacle, junctions are C1.
double assembly_defect(const Exact1D& ex, const Fn& p1, const Fn& p2, double ga, double gb) {
  double worst = 0;
  auto upd = [&](double v) { worst = std::max(worst, std::abs(v)); };
  REQUIRE(!ex.arcs.empty());
  upd(ex.arcs.front().lo + 1);
  upd(ex.arcs.back().hi - 1);
  upd(ex.value(-1) - ga);
  upd(ex.value(1) - gb);
  for (std::size_t i = 0; i < ex.arcs.size(); ++i) {
    const Arc& a = ex.arcs[i];
    if (i + 1 < ex.arcs.size()) {
      const Arc& b = ex.arcs[i + 1];
      upd(a.hi - b.lo);
      upd(a.value(a.hi) - b.value(b.lo));
      upd(a.slope(a.hi) - b.slope(b.lo));
    }
    for (int s = 0; s <= 50; ++s) {
      const double x = a.lo + (a.hi - a.lo) * s / 50.0;
      switch (a.kind) {
        case ArcKind::Free:
          upd(a.c2);
          worst = std::max(worst, std::max(0.0, p1(x) - a.value(x)));
          worst = std::max(worst, std::max(0.0, a.value(x) - p2(x)));
          break;
        case ArcKind::LowerContact: upd(a.value(x) - p1(x)); break;
        case ArcKind::UpperContact: upd(a.value(x) - p2(x)); break;
      }
    }
  }
  return worst;
}

const double kT = 1.0 - std::sqrt(3.0) / 2.0;

}  // namespace

TEST_CASE("tangent-line assembly") {
  const Fn p1 = [](double x) { return 0.5 - 2 * x * x; };
  const Fn p2 = [](double) { return 1.0; };
  const ProblemSpec P = problem1d(65, p1, p2, 0, 0);
  const Exact1D ex = exact_1d_solution(P);
  const auto lc = ex.contacts(ArcKind::LowerContact);
  REQUIRE(lc.size() == 1);
  CHECK(lc[0].first == doctest::Approx(-kT).epsilon(1e-10));
  CHECK(lc[0].second == doctest::Approx(kT).epsilon(1e-10));
  CHECK(ex.contacts(ArcKind::UpperContact).empty());
  // 2 t^2 - 4 t + 0.5 = 0
  CHECK(std::abs(2 * kT * kT - 4 * kT + 0.5) <= 1e-14);
  CHECK(assembly_defect(ex, p1, p2, 0, 0) <= 1e-10);
  // The free arcs are the tangent lines through (+-1, 0).
  CHECK(ex.arcs.front().slope(-1) == doctest::Approx(4 * kT).epsilon(1e-10));
}

TEST_CASE("double-contact assembly") {
  const Fn p1 = [](double x) { return 0.4 - 4 * (x + 0.5) * (x + 0.5); };
  const Fn p2 = [](double x) { return -0.4 + 4 * (x - 0.5) * (x - 0.5); };
  const ProblemSpec P = problem1d(129, p1, p2, 0, 0);
  const Exact1D ex = exact_1d_solution(P);
  CHECK(ex.contacts(ArcKind::LowerContact).size() == 1);
  CHECK(ex.contacts(ArcKind::UpperContact).size() == 1);
  CHECK(ex.arcs.size() == 5);
  CHECK(assembly_defect(ex, p1, p2, 0, 0) <= 1e-10);
  // Point symmetry u(-x) = -u(x) of the data carries over.
  for (double x : {0.1, 0.3, 0.55, 0.8}) CHECK(ex.value(-x) == doctest::Approx(-ex.value(x)).epsilon(1e-9));
}

TEST_CASE("exact assembly matches pdas to 2 h^2") {
  const Fn p1 = [](double x) { return 0.5 - 2 * x * x; };
  const Fn p2 = [](double) { return 1.0; };
  for (int n : {129, 513}) {
    const ProblemSpec P = problem1d(n, p1, p2, 0, 0);
    const ScalarField ex = exact_1d_solution(P).sample(P.grid());
    const PdasResult pd = solve_pdas(P);
    double d = 0;
    for (std::size_t k = 0; k < ex.size(); ++k) d = std::max(d, std::abs(ex[k] - pd.u[k]));
    const double h = P.grid().h(0);
    CHECK(d <= 2 * h * h);
  }
  const Fn q1 = [](double x) { return 0.4 - 4 * (x + 0.5) * (x + 0.5); };
  const Fn q2 = [](double x) { return -0.4 + 4 * (x - 0.5) * (x - 0.5); };
  const ProblemSpec Q = problem1d(513, q1, q2, 0, 0);
  const ScalarField ex = exact_1d_solution(Q).sample(Q.grid());
  const PdasResult pd = solve_pdas(Q);
  double d = 0;
  for (std::size_t k = 0; k < ex.size(); ++k) d = std::max(d, std::abs(ex[k] - pd.u[k]));
  const double h = Q.grid().h(0);
  CHECK(d <= 2 * h * h);
}

TEST_CASE("exact assembly rejects unsupported problems") {
  const std::vector<double> l{-1, -1}, h{1, 1};
  const std::vector<int> c{5, 5};
  const Grid g2 = Grid::build(l, h, c);
  const ProblemSpec P2 = ProblemSpec::with_boundary_field(
      OperatorSpec::laplacian(2), ScalarField::constant(g2, -1), ScalarField::constant(g2, 1),
      ScalarField::constant(g2, 0), std::nullopt, ProblemForm::General);
  CHECK_THROWS_AS(exact_1d_solution(P2), ValidationError);

  const Grid g = line(33);
  const ProblemSpec Pp(OperatorSpec::pucci_plus(1, 1, 2), ScalarField::constant(g, -1), ScalarField::constant(g, 1),
                       {0.0, 0.0}, std::nullopt, ProblemForm::General);
  CHECK_THROWS_AS(exact_1d_solution(Pp), ValidationError);

  const ProblemSpec Pc(OperatorSpec::laplacian(1),
                       ScalarField::sample(g, [](const Point& p) { return -1 + std::abs(p[0]); }),
                       ScalarField::constant(g, 1), {0.0, 0.0}, std::nullopt, ProblemForm::General);
  CHECK_THROWS_AS(exact_1d_solution(Pc), ValidationError);
}

TEST_CASE("pdas cycling is reported with its history") {
  const Fn p1 = [](double x) { return 0.5 - 2 * x * x; };
  const Fn p2 = [](double) { return 1.0; };
  const ProblemSpec P = problem1d(513, p1, p2, 0, 0);
  PdasParams prm;
  prm.max_cycles = 2;
  try {
    solve_pdas(P, prm);
    FAIL("expected CyclingError");
  } catch (const CyclingError& e) {
    CHECK(!e.history().empty());
  }
}

TEST_CASE("pdas and penalty agree on a 2D pucci problem") {
  const std::vector<double> l{-1, -1}, h{1, 1};
  const std::vector<int> c{33, 33};
  const Grid g = Grid::build(l, h, c);
  const ScalarField phi1 =
      ScalarField::sample(g, [](const Point& p) { return 0.25 - 1.2 * (p[0] * p[0] + p[1] * p[1]); });
  const ScalarField phi2 = ScalarField::sample(g, [](const Point& p) {
    return 0.02 + 0.8 * ((p[0] - 0.6) * (p[0] - 0.6) + (p[1] + 0.55) * (p[1] + 0.55));
  });
  const ProblemSpec P = ProblemSpec::with_boundary_field(OperatorSpec::pucci_plus(2, 1, 2), phi1, phi2,
                                                         ScalarField::constant(g, 0.0), std::nullopt,
                                                         ProblemForm::General);
  const std::vector<double> s = default_schedule(g);
  const SolveResult r = solve_double_obstacle(P, s);
  const PdasResult pd = solve_pdas(P);
  double d = 0;
  for (std::size_t k = 0; k < g.size(); ++k) d = std::max(d, std::abs(r.u[k] - pd.u[k]));
  const double h1 = g.h(0);
  CHECK(d <= 5 * s.back() + 5 * h1 * h1);
  bool lower = false, upper = false;
  for (std::size_t k = 0; k < g.size(); ++k) lower = lower || pd.lower_active[k], upper = upper || pd.upper_active[k];
  CHECK(lower);
  CHECK(upper);
}
