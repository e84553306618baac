#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "olab/error.hpp"
#include "olab/operators.hpp"
#include "olab/symeig.hpp"

using namespace olab;

namespace {

Eigen::MatrixXd to_eigen(const Hessian& H) {
  const int n = H.dim();
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = H(i, j);
  return M;
}

// Pucci values from eigenvalues computed by Eigen, not by the library.
double pucci_oracle(const Hessian& H, double l0, double l1, bool plus) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(H), Eigen::EigenvaluesOnly);
  double pos = 0, neg = 0;
  for (int i = 0; i < H.dim(); ++i) {
    const double e = es.eigenvalues()[i];
    if (e > 0) pos += e;
    else neg -= e;
  }
  return plus ? l1 * pos - l0 * neg : l0 * pos - l1 * neg;
}

Hessian diag(std::initializer_list<double> d) {
  const std::vector<double> v(d);
  return Hessian::diagonal(v);
}

}  // namespace

TEST_CASE("jacobi eigenvalues agree with an independent solver") {
  SampleRng rng(21);
  for (int dim = 1; dim <= 3; ++dim) {
    for (int s = 0; s < 300; ++s) {
      const Hessian H = random_symmetric(rng, dim, std::pow(10.0, rng.uniform(-3, 3)));
      const SymEig e = symmetric_eigen(H);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(H));
      const double scale = std::max(1e-300, H.frobenius_norm());
      for (int i = 0; i < dim; ++i) {
        CHECK(std::abs(e.values[i] - es.eigenvalues()[i]) <= 1e-11 * scale);
        if (i > 0) CHECK(e.values[i - 1] <= e.values[i]);
      }
      // H v = lambda v for each returned column.
      for (int j = 0; j < dim; ++j) {
        double res = 0, nv = 0;
        for (int i = 0; i < dim; ++i) {
          double hv = 0;
          for (int k = 0; k < dim; ++k) hv += H(i, k) * e.vectors[k][j];
          res = std::max(res, std::abs(hv - e.values[j] * e.vectors[i][j]));
          nv += e.vectors[i][j] * e.vectors[i][j];
        }
        CHECK(res <= 1e-10 * scale);
        CHECK(nv == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
  Hessian bad(2);
  bad.set(0, 1, NAN);
  CHECK_THROWS_AS(symmetric_eigen(bad), NumericalError);
}

TEST_CASE("operator values on the catalog examples") {
  const Site s{};
  CHECK(OperatorSpec::pucci_plus(2, 1, 2).eval(diag({1, -1}), s) == doctest::Approx(1.0));
  CHECK(OperatorSpec::trace_linear(Hessian::identity(2)).eval(diag({1, 1}), s) == doctest::Approx(2.0));
  const OperatorSpec b = OperatorSpec::bellman_sup(
      {OperatorSpec::trace_linear(Hessian::identity(2)), OperatorSpec::trace_linear(Hessian::identity(2) * 2.0)});
  CHECK(b.eval(diag({1, 1}), s) == doctest::Approx(4.0));
  CHECK(OperatorSpec::pucci_minus(2, 1, 2).eval(diag({1, -1}), s) == doctest::Approx(-1.0));
  Hessian bad(2);
  bad.set(0, 0, INFINITY);
  CHECK_THROWS_AS(OperatorSpec::pucci_plus(2, 1, 2).eval(bad, s), NumericalError);
}

TEST_CASE("pucci operators match the eigenvalue formula") {
  SampleRng rng(8);
  for (int dim = 1; dim <= 3; ++dim) {
    const OperatorSpec pp = OperatorSpec::pucci_plus(dim, 0.5, 3.0);
    const OperatorSpec pm = OperatorSpec::pucci_minus(dim, 0.5, 3.0);
    for (int s = 0; s < 500; ++s) {
      const Hessian H = random_symmetric(rng, dim, 10.0);
      const double sc = 1e-11 * std::max(1.0, H.frobenius_norm());
      CHECK(std::abs(pp.eval(H, Point{}) - pucci_oracle(H, 0.5, 3.0, true)) <= sc);
      CHECK(std::abs(pm.eval(H, Point{}) - pucci_oracle(H, 0.5, 3.0, false)) <= sc);
      // P-(M) = -P+(-M)
      CHECK(std::abs(pm.eval(H, Point{}) + pp.eval(H * -1.0, Point{})) <= sc);
    }
  }
}

TEST_CASE("eval_gradient is a directional derivative") {
  SampleRng rng(17);
  const std::vector<OperatorSpec> ops{
      OperatorSpec::laplacian(2), OperatorSpec::pucci_plus(2, 1, 2), OperatorSpec::pucci_minus(3, 0.7, 1.9),
      OperatorSpec::bellman_sup({OperatorSpec::laplacian(2), OperatorSpec::trace_linear(diag({2, 0.5}))})};
  for (const OperatorSpec& op : ops) {
    for (int s = 0; s < 200; ++s) {
      const Hessian H = random_symmetric(rng, op.dim(), 1.0);
      const Hessian D = random_symmetric(rng, op.dim(), 1.0);
      Hessian G(op.dim());
      const double f0 = op.eval_gradient(H, Site{}, G);
      CHECK(f0 == doctest::Approx(op.eval(H, Site{})));
      const double t = 1e-7;
      const double fd = (op.eval(H + D * t, Site{}) - f0) / t;
      // Nonsmooth points are measure zero; random samples avoid them.
      CHECK(std::abs(fd - G.dot(D)) <= 1e-5 * (1 + std::abs(fd)));
    }
  }
}

TEST_CASE("ellipticity suite passes for every operator kind") {
  const std::vector<OperatorSpec> ops{
      OperatorSpec::laplacian(1),
      OperatorSpec::laplacian(3),
      OperatorSpec::trace_linear(diag({1.0, 2.5})),
      OperatorSpec::pucci_plus(2, 1, 2),
      OperatorSpec::pucci_minus(3, 0.5, 4),
      OperatorSpec::bellman_sup({OperatorSpec::laplacian(2), OperatorSpec::trace_linear(diag({2, 0.5}))}),
      OperatorSpec::trace_linear(
          2,
          [](const Point& x) {
            return Hessian::identity(2) * (1.0 + 0.5 * std::sin(x[0]));
          },
          0.5, 1.5, 1.0, 0.5)};
  for (const OperatorSpec& op : ops) {
    const EllipticityReport r = verify_ellipticity(op, 10000, 42);
    CAPTURE(op.describe());
    CHECK(r.samples_tested == 10000);
    CHECK(r.violation_count == 0);
    CHECK(r.empirical_lambda0 >= op.lambda0() * (1 - 1e-9));
    CHECK(r.empirical_lambda1 <= op.lambda1() * (1 + 1e-9));
  }
}

TEST_CASE("ellipticity suite detects an overstated lambda0") {
  // N = I, M = -2I: F(M+N) - F(M) = lambda0 tr N = n < 1.5 n.
  const OperatorSpec op = OperatorSpec::pucci_plus(2, 1, 2).with_ellipticity(1.5, 2);
  const EllipticityReport r = verify_ellipticity(op, 1000, 1);
  CHECK(r.violation_count > 0);
  REQUIRE(!r.violations.empty());
  CHECK(r.violations.front().lower_gap < 0);
  CHECK(r.violations.size() <= 32);
}

TEST_CASE("ellipticity reports are deterministic in the seed") {
  const OperatorSpec op = OperatorSpec::pucci_minus(3, 1, 3);
  const EllipticityReport a = verify_ellipticity(op, 2000, 9), b = verify_ellipticity(op, 2000, 9);
  CHECK(a.empirical_lambda0 == b.empirical_lambda0);
  CHECK(a.empirical_lambda1 == b.empirical_lambda1);
}

TEST_CASE("hoelder suite") {
  const HolderReport c = verify_holder_x(OperatorSpec::pucci_plus(2, 1, 2), 10000, 3);
  CHECK(c.max_ratio == 0.0);
  CHECK(c.pass);

  // A(x) = (1 + sin(x1)/2) I: |tr((A(x) - A(y)) H)| <= (n/2) |x1 - y1| |H|_F
  for (int n = 1; n <= 3; ++n) {
    const OperatorSpec v = OperatorSpec::trace_linear(
        n, [n](const Point& x) { return Hessian::identity(n) * (1.0 + 0.5 * std::sin(x[0])); }, 0.5, 1.5, 1.0,
        0.5 * std::sqrt(static_cast<double>(n)));
    const HolderReport r = verify_holder_x(v, 10000, 4);
    CHECK(r.pass);
    CHECK(r.max_ratio <= n / 2.0 + 1e-9);
  }

  // Understated constant is caught.
  const OperatorSpec tight = OperatorSpec::trace_linear(
      2, [](const Point& x) { return Hessian::identity(2) * (1.0 + 0.5 * std::sin(x[0])); }, 0.5, 1.5, 1.0, 0.05);
  CHECK_FALSE(verify_holder_x(tight, 10000, 4).pass);
}

TEST_CASE("frozen shift subtracts the shifted value and keeps the constants") {
  const std::vector<double> lo{-1, -1}, hi{1, 1};
  const std::vector<int> c{9, 9};
  const Grid g = Grid::build(lo, hi, c);
  std::vector<Hessian> S;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point x = g.node(k);
    S.push_back(diag({-2.0 + 0.3 * x[0], 1.0 + 0.2 * x[1]}));
  }
  const OperatorSpec base = OperatorSpec::pucci_plus(2, 1, 2);
  const OperatorSpec fs = OperatorSpec::frozen_shift(base, g, S);
  CHECK(fs.kind() == OperatorKind::FrozenShift);
  CHECK(fs.lambda0() == 1.0);
  CHECK(fs.lambda1() == 2.0);
  SampleRng rng(2);
  for (std::size_t k = 0; k < g.size(); k += 7) {
    const Hessian H = random_symmetric(rng, 2, 3.0);
    const Site site{g.node(k), static_cast<std::ptrdiff_t>(k)};
    CHECK(fs.eval(H, site) == doctest::Approx(base.eval(H + S[k], site) - base.eval(S[k], site)));
    CHECK(fs.eval(Hessian::zero(2), site) == doctest::Approx(0.0));
  }
  CHECK(verify_ellipticity(fs, 10000, 7).violation_count == 0);
  CHECK(verify_holder_x(fs, 10000, 7).pass);
}

TEST_CASE("trace_linear rejects indefinite coefficients") {
  CHECK_THROWS_AS(OperatorSpec::trace_linear(diag({1.0, -1.0})), ValidationError);
}

TEST_CASE("random positive definite samples are positive definite") {
  SampleRng rng(6);
  for (int s = 0; s < 500; ++s) {
    const Hessian N = random_positive_definite(rng, 3, 0.1, 5.0);
    const auto e = symmetric_eigenvalues(N);
    CHECK(e[0] >= 0.1 - 1e-12);
    CHECK(e[2] <= 5.0 + 1e-12);
  }
}
