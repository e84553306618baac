#include "olab/fbanalysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "olab/error.hpp"
#include "olab/geometry.hpp"

namespace olab {

namespace {

double dist(const Point& a, const Point& b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Calls fn(k, |x_k - c|) for every node in the closed ball B_r(c).
template <class Fn>
void for_each_in_ball(const Grid& g, const Point& c, double r, Fn&& fn) {
  const int n = g.dim();
  Index lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < n; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::floor((c[a] - r - g.lo(a)) / g.h(a))) - 1);
    hi[a] = std::min(g.count(a) - 1, static_cast<int>(std::ceil((c[a] + r - g.lo(a)) / g.h(a))) + 1);
    if (lo[a] > hi[a]) return;
  }
  const double rr = r * (1.0 + 1e-12);
  Index idx = lo;
  while (true) {
    const Point p = g.node(idx);
    const double d = dist(p, c, n);
    if (d <= rr) fn(g.flat(idx), d);
    int a = n - 1;
    while (a >= 0 && ++idx[a] > hi[a]) {
      idx[a] = lo[a];
      --a;
    }
    if (a < 0) break;
  }
}

template <class Fn>
void for_each_face_neighbor(const Grid& g, std::size_t k, Fn&& fn) {
  const Index idx = g.unflat(k);
  for (int a = 0; a < g.dim(); ++a) {
    if (idx[a] > 0) fn(k - g.stride(a));
    if (idx[a] < g.count(a) - 1) fn(k + g.stride(a));
  }
}

void check_ball_inside(const Grid& g, const Point& c, double r) {
  for (int a = 0; a < g.dim(); ++a) {
    const double slack = 1e-12 * (g.hi(a) - g.lo(a));
    if (c[a] - r < g.lo(a) - slack) {
      throw DomainError("ball of radius " + std::to_string(r) + " leaves the box on axis " + std::to_string(a), a,
                        c[a] - r);
    }
    if (c[a] + r > g.hi(a) + slack) {
      throw DomainError("ball of radius " + std::to_string(r) + " leaves the box on axis " + std::to_string(a), a,
                        c[a] + r);
    }
  }
}

bool ball_inside(const Grid& g, const Point& c, double r) {
  for (int a = 0; a < g.dim(); ++a) {
    const double slack = 1e-12 * (g.hi(a) - g.lo(a));
    if (c[a] - r < g.lo(a) - slack || c[a] + r > g.hi(a) + slack) return false;
  }
  return true;
}

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

double frac(double x) { return x - std::floor(x); }

// Orthonormal vectors completing `nu` to a basis of R^dim.
std::vector<Point> tangents(const Point& nu, int dim) {
  std::vector<Point> t;
  if (dim == 2) {
    t.push_back({-nu[1], nu[0], 0.0});
  } else if (dim == 3) {
    int m = 0;
    for (int a = 1; a < 3; ++a)
      if (std::abs(nu[a]) < std::abs(nu[m])) m = a;
    Point e{0.0, 0.0, 0.0};
    e[m] = 1.0;
    const double d = dot(e, nu, 3);
    Point t1{e[0] - d * nu[0], e[1] - d * nu[1], e[2] - d * nu[2]};
    const double l = norm(t1, 3);
    for (double& v : t1) v /= l;
    const Point t2{nu[1] * t1[2] - nu[2] * t1[1], nu[2] * t1[0] - nu[0] * t1[2], nu[0] * t1[1] - nu[1] * t1[0]};
    t.push_back(t1);
    t.push_back(t2);
  }
  return t;
}

Point normalized(Point v, int dim) {
  const double l = norm(v, dim);
  for (int a = 0; a < dim; ++a) v[a] /= l;
  return v;
}

}  // namespace

std::size_t SetDecomposition::count(const NodeMask& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), 1));
}

double default_set_tol(const ScalarField& u) {
  const double h = u.grid().max_h();
  return 10.0 * h * h * std::max(u.max_abs(), 1e-300);
}

SetDecomposition coincidence_sets(const ScalarField& u, const ScalarField& psi, double tol) {
  const Grid& g = u.grid();
  if (!(psi.grid() == g)) throw ValidationError("u and psi live on different grids");
  if (!(tol > 0.0)) throw ValidationError("set tolerance must be positive");
  const std::size_t N = g.size();
  const double h = g.min_h();
  SetDecomposition s{g, tol, NodeMask(N, 0), NodeMask(N, 0), NodeMask(N, 0), NodeMask(N, 0), NodeMask(N, 0),
                     NodeMask(N, 0)};
  for (std::size_t k = 0; k < N; ++k) {
    if (g.on_boundary(k)) continue;
    const Point grad = central_gradient(g, u.values(), k);
    const bool lam = std::abs(u[k]) <= tol && norm(grad, g.dim()) <= tol / h;
    s.lambda_u[k] = lam;
    s.omega_u[k] = !lam;
    s.contact_psi[k] = std::abs(u[k] - psi[k]) <= tol;
  }
  for (std::size_t k = 0; k < N; ++k) {
    if (s.lambda_u[k]) {
      bool edge = false;
      for_each_face_neighbor(g, k, [&](std::size_t j) { edge = edge || s.omega_u[j]; });
      s.gamma_u[k] = edge;
    }
    if (s.contact_psi[k]) {
      bool edge = false;
      for_each_face_neighbor(g, k, [&](std::size_t j) {
        edge = edge || (!g.on_boundary(j) && !s.contact_psi[j]);
      });
      s.gamma_psi[k] = edge;
    }
  }
  const int n = g.dim();
  for (std::size_t k = 0; k < N; ++k) {
    if (!s.gamma_u[k]) continue;
    const Index idx = g.unflat(k);
    bool near = false;
    const int corners = n == 1 ? 3 : (n == 2 ? 9 : 27);
    for (int c = 0; c < corners && !near; ++c) {
      Index j = idx;
      int code = c;
      bool ok = true;
      for (int a = 0; a < n; ++a) {
        j[a] += code % 3 - 1;
        code /= 3;
        ok = ok && j[a] >= 0 && j[a] < g.count(a);
      }
      near = ok && s.gamma_psi[g.flat(j)];
    }
    s.gamma_d[k] = near;
  }
  return s;
}

ThicknessValue thickness(const NodeMask& mask, const Grid& g, const Point& center, double r) {
  if (mask.size() != g.size()) throw ValidationError("mask size does not match grid");
  if (r < 2.0 * g.max_h() * (1.0 - 1e-9)) {
    throw ValidationError("thickness radius " + std::to_string(r) + " is below 2h");
  }
  std::vector<Point> pts;
  for_each_in_ball(g, center, r, [&](std::size_t k, double) {
    if (mask[k]) pts.push_back(g.node(k));
  });
  if (pts.empty()) return {};
  const double md = minimal_width(pts, g.dim());
  return {md, md / r};
}

ThicknessReport thickness_report(const NodeMask& mask, const Grid& grid, const Point& center,
                                 const std::vector<double>& radii) {
  ThicknessReport rep;
  rep.center = center;
  for (double r : radii) {
    const ThicknessValue t = thickness(mask, grid, center, r);
    rep.radii.push_back(r);
    rep.md.push_back(t.md);
    rep.delta.push_back(t.delta);
  }
  return rep;
}

ScalarField rescale(const ScalarField& u, const Point& x0, double rho, const Grid& out) {
  if (!(rho > 0.0)) throw ValidationError("rescale needs rho > 0");
  const Grid& g = u.grid();
  if (out.dim() != g.dim()) throw ValidationError("rescale grids differ in dimension");
  for (int a = 0; a < g.dim(); ++a) {
    const double slack = 1e-12 * (g.hi(a) - g.lo(a));
    const double lo = x0[a] + rho * out.lo(a), hi = x0[a] + rho * out.hi(a);
    if (lo < g.lo(a) - slack) throw DomainError("rescaled box leaves the domain on axis " + std::to_string(a), a, lo);
    if (hi > g.hi(a) + slack) throw DomainError("rescaled box leaves the domain on axis " + std::to_string(a), a, hi);
  }
  const double u0 = interpolate(u, x0);
  const double inv = 1.0 / (rho * rho);
  return ScalarField::sample(out, [&](const Point& x) {
    Point y{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim(); ++a) {
      y[a] = x0[a] + rho * x[a];
      y[a] = std::clamp(y[a], g.lo(a), g.hi(a));
    }
    return (interpolate(u, y) - u0) * inv;
  });
}

HalfspaceFit fit_halfspace(const ScalarField& u0) {
  const Grid& g = u0.grid();
  const int n = g.dim();
  const double umax = u0.max_value();
  if (!(umax > 0.0)) throw ValidationError("no positivity to fit");
  const auto v = u0.values();

  // Normal from the mean gradient over the top decile.
  std::vector<double> sorted(v.begin(), v.end());
  const std::size_t q = sorted.size() / 10;
  std::nth_element(sorted.begin(), sorted.begin() + q, sorted.end(), std::greater<double>());
  const double thresh = std::max(sorted[q], 0.0);
  Point gsum{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] >= thresh && v[k] > 0.0) {
      const Point gr = central_gradient(g, v, k);
      for (int a = 0; a < n; ++a) gsum[a] += gr[a];
    }
  }
  if (!(norm(gsum, n) > 0.0)) throw ValidationError("no gradient to orient the fit");
  HalfspaceFit fit;
  fit.nu = normalized(gsum, n);

  const double h = g.max_h();
  std::vector<std::size_t> ball;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (norm(g.node(k), n) <= 1.0 + 1e-12) ball.push_back(k);
  }
  if (ball.empty()) throw ValidationError("fit box does not contain the unit ball");

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double s = dot(g.node(k), fit.nu, n);
    if (s > 2.0 * h) {
      num += v[k] * 0.5 * s * s;
      den += 0.25 * s * s * s * s;
    }
  }
  if (!(den > 0.0)) throw ValidationError("no nodes on the positive side of the fitted plane");
  fit.c = num / den;

  auto misfit = [&](const Point& nu, double c, double* maxabs) {
    double ss = 0.0, mx = 0.0;
    for (std::size_t k : ball) {
      const double s = std::max(0.0, dot(g.node(k), nu, n));
      const double r = v[k] - 0.5 * c * s * s;
      ss += r * r;
      mx = std::max(mx, std::abs(r));
    }
    if (maxabs) *maxabs = mx;
    return ss;
  };
  double mx = 0.0;
  const double ss0 = misfit(fit.nu, fit.c, &mx);

  // Gauss-Newton in (tangential tilt of nu, c). Each step is halved until the
  // squared misfit decreases; stop when no halving helps.
  double ss = ss0;
  for (int it = 0; it < 20 && ss > 0.0; ++it) {
    const std::vector<Point> T = tangents(fit.nu, n);
    const int np = static_cast<int>(T.size()) + 1;
    Eigen::MatrixXd JtJ = Eigen::MatrixXd::Zero(np, np);
    Eigen::VectorXd Jtr = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd row(np);
    for (std::size_t k : ball) {
      const Point x = g.node(k);
      const double s = std::max(0.0, dot(x, fit.nu, n));
      const double r = v[k] - 0.5 * fit.c * s * s;
      for (std::size_t i = 0; i < T.size(); ++i) row[static_cast<Eigen::Index>(i)] = fit.c * s * dot(x, T[i], n);
      row[np - 1] = 0.5 * s * s;
      JtJ += row * row.transpose();
      Jtr += row * r;
    }
    const Eigen::VectorXd step = JtJ.ldlt().solve(Jtr);
    if (!step.allFinite()) break;
    bool improved = false;
    for (double t = 1.0; t > 1e-3; t *= 0.5) {
      Point nu = fit.nu;
      for (std::size_t i = 0; i < T.size(); ++i)
        for (int a = 0; a < n; ++a) nu[a] += t * step[static_cast<Eigen::Index>(i)] * T[i][a];
      nu = normalized(nu, n);
      const double c = fit.c + t * step[np - 1];
      double m2 = 0.0;
      const double s2 = misfit(nu, c, &m2);
      if (s2 < ss) {
        fit.nu = nu;
        fit.c = c;
        mx = m2;
        ss = s2;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  fit.residual = mx / umax;
  return fit;
}

double GrowthReport::spread() const {
  if (sup_over_r2.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(sup_over_r2.begin(), sup_over_r2.end());
  return *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
}

GrowthReport growth_report(const ScalarField& u, std::size_t fb_point, const std::vector<double>& radii) {
  const Grid& g = u.grid();
  if (fb_point >= g.size()) throw ValidationError("growth point is not a grid node");
  const Point c = g.node(fb_point);
  GrowthReport rep;
  rep.point = fb_point;
  for (double r : radii) {
    if (r < 4.0 * g.max_h() * (1.0 - 1e-9)) {
      throw ValidationError("growth radius " + std::to_string(r) + " is below 4h");
    }
    check_ball_inside(g, c, r);
    double S = -std::numeric_limits<double>::infinity();
    for_each_in_ball(g, c, r, [&](std::size_t k, double) { S = std::max(S, u[k]); });
    rep.radii.push_back(r);
    rep.sup_over_r2.push_back(std::max(S, 0.0) / (r * r));
  }
  rep.c0_estimate = rep.sup_over_r2.empty() ? 0.0 : *std::max_element(rep.sup_over_r2.begin(), rep.sup_over_r2.end());
  return rep;
}

NondegeneracyReport nondegeneracy_check(const ScalarField& u, const SetDecomposition& sets, const OperatorSpec& op,
                                        double c0, const std::vector<double>& radii, double slack,
                                        std::size_t max_points) {
  if (!(c0 > 0.0)) throw ValidationError("nondegeneracy needs c0 > 0");
  const Grid& g = u.grid();
  if (!(sets.grid == g)) throw ValidationError("sets and field live on different grids");
  NondegeneracyReport rep;
  rep.constant = c0 / (8.0 * op.lambda1() * g.dim());
  rep.slack = slack;
  rep.radii = radii;
  std::vector<std::size_t> centres;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if ((sets.omega_u[k] || sets.gamma_u[k]) && !sets.contact_psi[k]) centres.push_back(k);
  }
  const std::size_t stride = std::max<std::size_t>(1, (centres.size() + max_points - 1) / std::max<std::size_t>(1, max_points));
  const double h = g.max_h();
  for (std::size_t i = 0; i < centres.size(); i += stride) {
    const std::size_t k = centres[i];
    const Point x = g.node(k);
    bool used = false;
    for (double r : radii) {
      if (!ball_inside(g, x, r)) continue;
      double shell = -std::numeric_limits<double>::infinity();
      for_each_in_ball(g, x, r, [&](std::size_t j, double d) {
        if (d >= r - h) shell = std::max(shell, u[j]);
      });
      const double need = u[k] + rep.constant * r * r * (1.0 - slack);
      ++rep.checks;
      used = true;
      if (shell < need) rep.failures.push_back({k, r, shell, need});
    }
    if (used) ++rep.points_tested;
  }
  return rep;
}

std::vector<Point> cone_directions(int dim, const Point& axis_in, double delta, int n_directions,
                                   std::uint64_t seed) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("cone parameter delta must lie in (0, 1]");
  if (n_directions < 1) throw ValidationError("need at least one direction");
  const Point axis = normalized(axis_in, dim);
  std::vector<Point> out;
  if (dim == 1) {
    out.push_back(axis);
    return out;
  }
  double s1 = 0.0, s2 = 0.0;
  if (seed != 0) {
    SampleRng rng(seed);
    s1 = rng.uniform();
    s2 = rng.uniform();
  }
  const double tmax = std::atan(1.0 / delta);
  const std::vector<Point> T = tangents(axis, dim);
  for (int i = 0; i < n_directions; ++i) {
    Point e{0.0, 0.0, 0.0};
    if (dim == 2) {
      const double w = frac(radical_inverse(static_cast<std::uint64_t>(i) + 1, 2) + s1);
      const double th = tmax * (2.0 * w - 1.0);
      for (int a = 0; a < 2; ++a) e[a] = std::cos(th) * axis[a] + std::sin(th) * T[0][a];
    } else {
      // Uniform on the cap: cos(theta) uniform in [cos tmax, 1].
      const double w1 = frac(radical_inverse(static_cast<std::uint64_t>(i) + 1, 2) + s1);
      const double w2 = frac(radical_inverse(static_cast<std::uint64_t>(i) + 1, 3) + s2);
      const double ct = 1.0 - w1 * (1.0 - std::cos(tmax));
      const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      const double ph = 2.0 * std::numbers::pi * w2;
      for (int a = 0; a < 3; ++a) {
        e[a] = ct * axis[a] + st * (std::cos(ph) * T[0][a] + std::sin(ph) * T[1][a]);
      }
    }
    out.push_back(e);
  }
  return out;
}

MonotonicityReport monotonicity_check(const ScalarField& u, double delta, std::size_t center, double radius,
                                      int n_directions, const Point& axis, std::uint64_t seed, double slack) {
  const Grid& g = u.grid();
  if (center >= g.size()) throw ValidationError("monotonicity centre is not a grid node");
  const int n = g.dim();
  MonotonicityReport rep;
  rep.delta = delta;
  rep.region_radius = radius;
  rep.axis = normalized(axis, n);
  rep.slack = slack > 0.0 ? slack : 5.0 * g.max_h() * u.max_abs();
  const std::vector<Point> dirs = cone_directions(n, axis, delta, n_directions, seed);
  rep.directions_tested = static_cast<std::int64_t>(dirs.size());
  double mn = std::numeric_limits<double>::infinity();
  for_each_in_ball(g, g.node(center), radius, [&](std::size_t k, double) {
    if (g.on_boundary(k)) return;
    const Point gr = central_gradient(g, u.values(), k);
    ++rep.nodes_tested;
    for (const Point& e : dirs) mn = std::min(mn, dot(gr, e, n));
  });
  rep.min_directional_derivative = rep.nodes_tested ? mn : 0.0;
  rep.pass = rep.nodes_tested > 0 && rep.min_directional_derivative >= -rep.slack;
  return rep;
}

FBGraph extract_fb_graph(const ScalarField& u, const SetDecomposition& sets, int axis, const Point& center,
                         const std::vector<double>& radii) {
  const Grid& g = u.grid();
  const int n = g.dim();
  if (axis < 0 || axis >= n) throw ValidationError("graph axis out of range");
  if (radii.empty()) throw ValidationError("graph extraction needs at least one radius");
  const double R = *std::max_element(radii.begin(), radii.end());
  FBGraph out;
  out.axis = axis;
  out.center = center;

  // Gamma nodes in the window, grouped by column (flat index with the axis
  // coordinate zeroed).
  std::map<std::size_t, std::vector<int>> columns;
  for_each_in_ball(g, center, R, [&](std::size_t k, double) {
    if (!sets.gamma_u[k]) return;
    Index idx = g.unflat(k);
    const int i = idx[axis];
    idx[axis] = 0;
    columns[g.flat(idx)].push_back(i);
  });
  if (columns.empty()) throw ValidationError("free boundary is empty near the requested point");

  const double ha = g.h(axis);
  const double floor_level = default_set_tol(u);
  std::map<std::size_t, std::size_t> sample_of;
  std::vector<int> side_of;
  for (auto& [key, is] : columns) {
    std::sort(is.begin(), is.end());
    GraphSample s;
    s.xprime = g.node(key);
    s.xprime[axis] = 0.0;
    const int lo = is.front(), hi = is.back();
    int side = 0;
    if (hi - lo + 1 == static_cast<int>(is.size())) {
      const std::size_t st = g.stride(axis);
      auto in_omega = [&](int i) { return i >= 0 && i < g.count(axis) && sets.omega_u[key + i * st]; };
      const bool up = in_omega(hi + 1), down = in_omega(lo - 1);
      if (up && down) {
        side = u[key + (hi + 1) * st] >= u[key + (lo - 1) * st] ? 1 : -1;
      } else if (up) {
        side = 1;
      } else if (down) {
        side = -1;
      }
      const double zlo = g.coord(axis, lo), zhi = g.coord(axis, hi);
      double z = 0.5 * (zlo + zhi);
      if (side != 0) {
        // Skip omega nodes whose values are still at the level of the
        // solver's floor inside the contact set.
        int i1 = side > 0 ? hi + 1 : lo - 1;
        for (int step = 0; step < 4 && in_omega(i1 + side) && u[key + i1 * st] < floor_level; ++step) i1 += side;
        const int i2 = i1 + side;
        if (i2 >= 0 && i2 < g.count(axis)) {
          const double w1 = std::sqrt(std::max(0.0, u[key + i1 * st]));
          const double w2 = std::sqrt(std::max(0.0, u[key + i2 * st]));
          const double z1 = g.coord(axis, i1), z2 = g.coord(axis, i2);
          // The zero may sit a few spacings inside the band when the
          // membership tolerance is coarse, but never past the first omega node.
          const double reach = side > 0 ? zlo - 3.0 * ha : zhi + 3.0 * ha;
          if (w2 > w1) z = std::clamp(z1 - w1 * (z2 - z1) / (w2 - w1), std::min(reach, z1), std::max(reach, z1));
        }
        s.resolved = true;
      }
      s.height = z;
    }
    if (!s.resolved) ++out.unresolved;
    sample_of[key] = out.samples.size();
    side_of.push_back(side);
    out.samples.push_back(s);
  }

  // Transverse axes and the local slope fit over +-2 columns.
  std::vector<int> tr;
  for (int a = 0; a < n; ++a)
    if (a != axis) tr.push_back(a);
  auto lookup = [&](const GraphSample& s, const std::vector<int>& off) -> const GraphSample* {
    Index idx = g.unflat(sample_of.begin()->first);
    Point p = s.xprime;
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const int a = tr[t];
      const int i = static_cast<int>(std::lround((p[a] - g.lo(a)) / g.h(a))) + off[t];
      if (i < 0 || i >= g.count(a)) return nullptr;
      idx[a] = i;
    }
    idx[axis] = 0;
    auto it = sample_of.find(g.flat(idx));
    if (it == sample_of.end() || !out.samples[it->second].resolved) return nullptr;
    return &out.samples[it->second];
  };
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    GraphSample& s = out.samples[i];
    if (!s.resolved) continue;
    const int m = static_cast<int>(tr.size());
    std::vector<std::array<double, 4>> rows;
    std::vector<int> off(tr.size(), 0);
    const int span = m == 0 ? 0 : 2;
    const int total = m == 0 ? 1 : (m == 1 ? 5 : 25);
    for (int c = 0; c < total; ++c) {
      int code = c;
      for (int t = 0; t < m; ++t) {
        off[t] = code % 5 - span;
        code /= 5;
      }
      const GraphSample* o = lookup(s, off);
      if (!o) continue;
      std::array<double, 4> r{1.0, 0.0, 0.0, o->height};
      for (int t = 0; t < m; ++t) r[1 + t] = o->xprime[tr[t]] - s.xprime[tr[t]];
      rows.push_back(r);
    }
    Point grad{0.0, 0.0, 0.0};
    if (m > 0) {
      if (static_cast<int>(rows.size()) < m + 2) continue;
      Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), m + 1);
      Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c <= m; ++c) M(static_cast<Eigen::Index>(r), c) = rows[r][c];
        y[static_cast<Eigen::Index>(r)] = rows[r][3];
      }
      const Eigen::VectorXd sol = M.colPivHouseholderQr().solve(y);
      for (int t = 0; t < m; ++t) grad[tr[t]] = sol[1 + t];
    }
    Point nu{0.0, 0.0, 0.0};
    for (int t : tr) nu[t] = -grad[t];
    nu[axis] = 1.0;
    nu = normalized(nu, n);
    for (int a = 0; a < n; ++a) nu[a] *= side_of[i];
    s.nu = nu;
    s.has_normal = true;
  }

  auto position = [&](const GraphSample& s) {
    Point p = s.xprime;
    p[axis] = s.height;
    return p;
  };
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : out.samples) {
    if (!s.has_normal) continue;
    const double d = dist(position(s), center, n);
    if (d < best) {
      best = d;
      out.nu0 = s.nu;
    }
  }
  for (double r : radii) {
    double var = 0.0, lip = 0.0;
    for (const auto& s : out.samples) {
      if (!s.resolved || dist(position(s), center, n) > r) continue;
      if (s.has_normal && best < std::numeric_limits<double>::infinity()) {
        Point d{};
        for (int a = 0; a < n; ++a) d[a] = s.nu[a] - out.nu0[a];
        var = std::max(var, norm(d, n));
      }
      for (std::size_t t = 0; t < tr.size(); ++t) {
        std::vector<int> off(tr.size(), 0);
        off[t] = 1;
        const GraphSample* o = lookup(s, off);
        if (!o || dist(position(*o), center, n) > r) continue;
        lip = std::max(lip, std::abs(o->height - s.height) / g.h(tr[t]));
      }
    }
    out.normal_variation.emplace_back(r, var);
    out.lipschitz_local.emplace_back(r, lip);
  }
  return out;
}

const char* to_string(BlowupVerdict v) noexcept {
  switch (v) {
    case BlowupVerdict::Halfspace: return "halfspace";
    case BlowupVerdict::UpperObstacle: return "upper-obstacle";
    case BlowupVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

BlowupReport classify_blowup(const ScalarField& u, const ScalarField& psi, std::size_t x0,
                             const std::vector<double>& rhos, const BlowupParams& prm) {
  const Grid& g = u.grid();
  const int n = g.dim();
  if (!(psi.grid() == g)) throw ValidationError("u and psi live on different grids");
  if (x0 >= g.size()) throw ValidationError("blowup point is not a grid node");
  if (rhos.empty()) throw ValidationError("blowup needs at least one rho");
  for (std::size_t i = 1; i < rhos.size(); ++i) {
    if (!(rhos[i] < rhos[i - 1])) throw ValidationError("blowup rhos must be decreasing");
  }
  const double h = g.max_h();
  const Point p0 = g.node(x0);
  const double tol = prm.set_tol > 0.0 ? prm.set_tol : default_set_tol(u);
  const SetDecomposition sets = coincidence_sets(u, psi, tol);

  BlowupReport rep;
  rep.in_gamma = sets.gamma_u[x0];
  rep.in_gamma_d = sets.gamma_d[x0];
  std::vector<double> lo(n, -1.0), hi(n, 1.0);
  ScalarField last_u = u, last_psi = psi;
  for (double rho : rhos) {
    if (rho < 8.0 * h * (1.0 - 1e-9)) {
      throw ValidationError("blowup rho " + std::to_string(rho) + " is below 8h");
    }
    // Snap rho to a multiple M of h and use K | M half-nodes so the mapped
    // nodes are grid nodes.
    const int M = std::max(1, static_cast<int>(std::lround(rho / h)));
    int K = std::min(M, prm.max_half_nodes);
    while (M % K != 0) --K;
    const double r = M * h;
    std::vector<int> counts(n, 2 * K + 1);
    const Grid out = Grid::build(lo, hi, counts);
    ScalarField ur = rescale(u, p0, r, out);
    ScalarField pr = rescale(psi, p0, r, out);
    rep.rhos.push_back(r);
    HalfspaceFit fu;
    if (ur.max_value() > 0.0) {
      try {
        fu = fit_halfspace(ur);
      } catch (const ValidationError&) {
        fu.residual = std::numeric_limits<double>::infinity();
      }
    } else {
      fu.residual = std::numeric_limits<double>::infinity();
    }
    rep.fits_u.push_back(fu);
    std::optional<HalfspaceFit> fp;
    if (pr.max_value() > 0.0) {
      try {
        fp = fit_halfspace(pr);
      } catch (const ValidationError&) {
      }
    }
    rep.fits_psi.push_back(fp);
    last_u = std::move(ur);
    last_psi = std::move(pr);
  }
  rep.thickness_trace = thickness_report(sets.lambda_u, g, p0, rep.rhos);
  rep.thickness_ok = std::all_of(rep.thickness_trace.delta.begin(), rep.thickness_trace.delta.end(),
                                 [&](double d) { return d >= prm.eps0; });
  const HalfspaceFit& fu = rep.fits_u.back();
  const auto& fp = rep.fits_psi.back();
  if (fp) rep.a = fp->c;

  double diff = 0.0;
  for (std::size_t k = 0; k < last_u.size(); ++k) diff = std::max(diff, std::abs(last_u[k] - last_psi[k]));
  const bool u_is_psi = fp && diff <= prm.fit_tol * std::max(last_psi.max_abs(), 1e-300);

  if (fu.residual <= prm.fit_tol && rep.thickness_ok) {
    rep.verdict = BlowupVerdict::Halfspace;
    rep.c = fu.c;
  } else if (u_is_psi && fp->residual <= prm.fit_tol) {
    rep.verdict = BlowupVerdict::UpperObstacle;
    rep.c = fp->c;
  }
  const Point& nu = rep.verdict == BlowupVerdict::UpperObstacle ? fp->nu : fu.nu;
  if (prm.op && prm.source_value && rep.verdict != BlowupVerdict::Inconclusive) {
    Hessian nn(n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) nn.set(i, j, nu[i] * nu[j]);
    rep.source_scale = *prm.source_value / prm.op->eval(nn, Site{p0, static_cast<std::ptrdiff_t>(x0)});
  }
  if (rep.verdict != BlowupVerdict::Inconclusive) {
    std::vector<std::string> b;
    if (rep.source_scale && std::abs(rep.c - *rep.source_scale) <= 0.1 * std::abs(*rep.source_scale)) b.push_back("source");
    if (rep.a > 0.0 && std::abs(rep.c - rep.a) <= 0.1 * rep.a) b.push_back("upper");
    for (std::size_t i = 0; i < b.size(); ++i) rep.branch += (i ? "," : "") + b[i];
  }
  return rep;
}

}  // namespace olab
