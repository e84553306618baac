#include "olab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>

#include "olab/discrete.hpp"
#include "olab/solver.hpp"
#include "olab/sparse.hpp"

namespace olab {

namespace {

// Newton for F(D2u) = f on the nodes with free_mask set; other nodes keep
// their values. Returns the iteration count.
int newton_on_free(const ProblemSpec& p, std::vector<double>& u, const std::vector<unsigned char>& free_mask,
                   const PdasParams& prm, LinearSolver& linear) {
  std::vector<std::size_t> rows;
  std::vector<int> col_of(u.size(), -1);
  for (std::size_t k : p.interior_nodes()) {
    if (free_mask[k]) {
      col_of[k] = static_cast<int>(rows.size());
      rows.push_back(k);
    }
  }
  if (rows.empty()) return 0;
  std::vector<Hessian> G(rows.size(), Hessian(p.grid().dim()));
  std::vector<double> R(rows.size());
  auto evaluate = [&](const std::vector<double>& v, bool grad, double& maxn) {
    double s = 0.0;
    maxn = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      R[j] = equation_residual(p, v, rows[j], grad ? &G[j] : nullptr);
      s += R[j] * R[j];
      maxn = std::max(maxn, std::abs(R[j]));
    }
    return s;
  };
  double maxn = 0.0;
  double ss = evaluate(u, true, maxn);
  int it = 0;
  std::vector<double> trial;
  while (maxn > prm.newton_tol) {
    if (it >= prm.max_newton) {
      std::ostringstream os;
      os << "PDAS inner Newton did not converge (residual " << maxn << ")";
      throw DivergenceError(os.str(), u, 0.0, maxn);
    }
    CsrBuilder b(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) append_stencil_row(b, p.grid(), G[j], rows[j], col_of, 0.0);
    linear.factorize(b.finish());
    std::vector<double> rhs(R.size());
    for (std::size_t j = 0; j < R.size(); ++j) rhs[j] = -R[j];
    const std::vector<double> d = linear.solve(rhs);
    double t = 1.0, ts = 0.0, tmax = 0.0;
    bool ok = false;
    for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
      trial = u;
      for (std::size_t j = 0; j < rows.size(); ++j) trial[rows[j]] += t * d[j];
      ts = evaluate(trial, false, tmax);
      if (ts <= (1.0 - 2e-4 * t) * ss) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      std::ostringstream os;
      os << "PDAS inner Newton line search failed (residual " << maxn << ")";
      throw DivergenceError(os.str(), u, 0.0, maxn);
    }
    u.swap(trial);
    ss = evaluate(u, true, maxn);
    ++it;
  }
  return it;
}

}  // namespace

PdasResult solve_pdas(const ProblemSpec& p, const PdasParams& prm) {
  const std::size_t N = p.grid().size();
  const auto phi1 = p.phi1().values();
  const auto phi2 = p.phi2().values();
  LinearSolver linear;
  std::vector<double> u = p.apply_boundary({phi1.begin(), phi1.end()});
  std::vector<unsigned char> free_mask(N, 0), A1(N, 0), A2(N, 0), prev1, prev2;
  for (std::size_t k : p.interior_nodes()) free_mask[k] = 1;
  PdasResult res{ScalarField(p.grid(), u), 0, 0, {}, {}, {}};
  res.newton_iterations += newton_on_free(p, u, free_mask, prm, linear);
  std::vector<double> lambda(N, 0.0);
  // Rounding-level violations must not flip a node.
  const double tiny = 1e-12 * p.scale();
  // mu is measured in units of the stencil diagonal so that the primal and
  // multiplier terms have the same scale.
  double diag = 0.0;
  for (int a = 0; a < p.grid().dim(); ++a) diag += 2.0 / (p.grid().h(a) * p.grid().h(a));
  const double mu = prm.mu * p.op().lambda1() * diag;

  for (int cycle = 0; cycle <= prm.max_cycles; ++cycle) {
    std::fill(A1.begin(), A1.end(), 0);
    std::fill(A2.begin(), A2.end(), 0);
    std::size_t n1 = 0, n2 = 0;
    for (std::size_t k : p.interior_nodes()) {
      if (phi1[k] == phi2[k] || lambda[k] + mu * (phi1[k] - u[k]) > mu * tiny) {
        A1[k] = 1;
        ++n1;
      } else if (-lambda[k] + mu * (u[k] - phi2[k]) > mu * tiny) {
        A2[k] = 1;
        ++n2;
      }
    }
    res.history.emplace_back(n1, n2);
    if (cycle > 0 && A1 == prev1 && A2 == prev2) {
      res.cycles = cycle;
      res.u = ScalarField(p.grid(), std::move(u));
      res.lower_active = std::move(A1);
      res.upper_active = std::move(A2);
      return res;
    }
    for (std::size_t k : p.interior_nodes()) {
      free_mask[k] = !(A1[k] || A2[k]);
      if (A1[k]) u[k] = phi1[k];
      if (A2[k]) u[k] = phi2[k];
    }
    res.newton_iterations += newton_on_free(p, u, free_mask, prm, linear);
    for (std::size_t k : p.interior_nodes()) {
      lambda[k] = free_mask[k] ? 0.0 : -equation_residual(p, u, k);
    }
    prev1 = A1;
    prev2 = A2;
  }
  std::ostringstream os;
  os << "PDAS active sets did not settle in " << prm.max_cycles << " cycles; last sizes (|A1|,|A2|):";
  const std::size_t from = res.history.size() > 6 ? res.history.size() - 6 : 0;
  for (std::size_t i = from; i < res.history.size(); ++i) {
    os << " (" << res.history[i].first << "," << res.history[i].second << ")";
  }
  throw CyclingError(os.str(), res.history);
}

const char* to_string(ArcKind kind) noexcept {
  switch (kind) {
    case ArcKind::Free: return "free";
    case ArcKind::LowerContact: return "lower-contact";
    case ArcKind::UpperContact: return "upper-contact";
  }
  return "unknown";
}

double Exact1D::value(double x) const {
  if (arcs.empty()) throw InvariantError("empty 1D assembly");
  for (const Arc& a : arcs) {
    if (x <= a.hi) return a.value(x);
  }
  return arcs.back().value(x);
}

ScalarField Exact1D::sample(const Grid& grid) const {
  return ScalarField::sample(grid, [&](const Point& p) { return value(p[0]); });
}

std::string Exact1D::describe() const {
  std::ostringstream os;
  os.precision(12);
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    os << (i ? " | " : "") << to_string(arcs[i].kind) << " [" << arcs[i].lo << ", " << arcs[i].hi << "]";
  }
  return os.str();
}

std::vector<std::pair<double, double>> Exact1D::contacts(ArcKind kind) const {
  std::vector<std::pair<double, double>> out;
  for (const Arc& a : arcs)
    if (a.kind == kind) out.emplace_back(a.lo, a.hi);
  return out;
}

namespace {

struct Quad {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double value(double x) const { return c0 + x * (c1 + x * c2); }
  double slope(double x) const { return c1 + 2.0 * c2 * x; }
  double curvature() const { return 2.0 * c2; }
};

Quad operator-(const Quad& a, const Quad& b) { return {a.c0 - b.c0, a.c1 - b.c1, a.c2 - b.c2}; }

double min_on(const Quad& q, double l, double r) {
  double m = std::min(q.value(l), q.value(r));
  if (q.c2 > 0.0) {
    const double v = -q.c1 / (2.0 * q.c2);
    if (v > l && v < r) m = std::min(m, q.value(v));
  }
  return m;
}

// Exact quadratic through three nodes, checked against every node.
Quad fit_quadratic(const ScalarField& f, const char* name, double scale) {
  const Grid& g = f.grid();
  const int n = g.count(0);
  const int i0 = 0, i1 = (n - 1) / 2, i2 = n - 1;
  const double x0 = g.coord(0, i0), x1 = g.coord(0, i1), x2 = g.coord(0, i2);
  const double y0 = f[i0], y1 = f[i1], y2 = f[i2];
  // Newton divided differences.
  const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
  const double d012 = (d12 - d01) / (x2 - x0);
  Quad q;
  q.c2 = d012;
  q.c1 = d01 - d012 * (x0 + x1);
  q.c0 = y0 - d01 * x0 + d012 * x0 * x1;
  for (int i = 0; i < n; ++i) {
    if (std::abs(q.value(g.coord(0, i)) - f[i]) > 1e-10 * scale) {
      throw ValidationError(std::string("exact 1D oracle needs a quadratic ") + name + "; node " +
                            std::to_string(i) + " is off the fitted polynomial");
    }
  }
  return q;
}

// Free arc with u'' = c tangent to obstacle q at s.
Quad tangent_arc(const Quad& q, double s, double c) {
  // q(s) + q'(s)(x - s) + (c/2)(x - s)^2 expanded.
  const double v = q.value(s), d = q.slope(s);
  return {v - d * s + 0.5 * c * s * s, d - c * s, 0.5 * c};
}

std::vector<double> roots_on(const std::function<double(double)>& h, double a, double b) {
  const int N = 4096;
  std::vector<double> out;
  double xp = a, hp = h(a);
  if (hp == 0.0) out.push_back(a);
  for (int i = 1; i <= N; ++i) {
    const double x = i == N ? b : a + (b - a) * i / N;
    const double hx = h(x);
    if (hx == 0.0) {
      out.push_back(x);
    } else if (hp != 0.0 && ((hp < 0.0) != (hx < 0.0))) {
      double lo = xp, hi = x, flo = hp;
      for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = h(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      out.push_back(0.5 * (lo + hi));
    }
    xp = x;
    hp = hx;
  }
  return out;
}

struct Setting {
  double a, b, ga, gb, c, scale;
  Quad lower, upper;
  double tol() const { return 1e-9 * scale; }
};

// Right end t of the free arc tangent to `from` at s that reaches tangency
// with `to`; nullopt when the gap never closes with zero slope.
std::optional<double> free_bridge_end(const Setting& st, const Quad& from, const Quad& to, bool to_upper,
                                      double s, double* gap) {
  const Quad q = tangent_arc(from, s, st.c);
  const Quad D = to_upper ? to - q : q - to;  // convex along the arc
  if (!(D.c2 > 0.0)) return std::nullopt;
  const double t = -D.c1 / (2.0 * D.c2);
  if (gap) *gap = D.value(t);
  return t;
}

bool valid_assembly(const Setting& st, const std::vector<Arc>& arcs) {
  const double tol = st.tol();
  if (arcs.empty() || std::abs(arcs.front().lo - st.a) > 1e-12 || std::abs(arcs.back().hi - st.b) > 1e-12) return false;
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const Arc& A = arcs[i];
    if (A.hi < A.lo - 1e-12) return false;
    if (i > 0 && std::abs(arcs[i - 1].hi - A.lo) > 1e-12) return false;
    const Quad q{A.c0, A.c1, A.c2};
    if (min_on(q - st.lower, A.lo, A.hi) < -tol) return false;
    if (min_on(st.upper - q, A.lo, A.hi) < -tol) return false;
    if (A.kind == ArcKind::LowerContact && st.lower.curvature() > st.c + tol) return false;
    if (A.kind == ArcKind::UpperContact && st.upper.curvature() < st.c - tol) return false;
    if (i > 0) {
      const Arc& P = arcs[i - 1];
      if (std::abs(P.value(A.lo) - A.value(A.lo)) > 1e-8 * st.scale) return false;
      if (std::abs(P.slope(A.lo) - A.slope(A.lo)) > 1e-7 * std::max(1.0, st.scale)) return false;
    }
  }
  if (std::abs(arcs.front().value(st.a) - st.ga) > tol) return false;
  if (std::abs(arcs.back().value(st.b) - st.gb) > tol) return false;
  return true;
}

Arc make_arc(double lo, double hi, ArcKind k, const Quad& q) { return Arc{lo, hi, k, q.c0, q.c1, q.c2}; }

// Enumerates assemblies with at most one contact arc per obstacle.
std::vector<std::vector<Arc>> candidates(const Setting& st) {
  std::vector<std::vector<Arc>> out;
  const double a = st.a, b = st.b, c = st.c;
  auto obstacle = [&](ArcKind k) -> const Quad& { return k == ArcKind::LowerContact ? st.lower : st.upper; };

  // Single free arc through both boundary values.
  {
    Quad q;
    q.c2 = 0.5 * c;
    const double slope = (st.gb - st.ga - q.c2 * (b * b - a * a)) / (b - a);
    q.c1 = slope;
    q.c0 = st.ga - slope * a - q.c2 * a * a;
    out.push_back({make_arc(a, b, ArcKind::Free, q)});
  }

  // Left junction candidates for a contact arc of kind k: either the contact
  // starts at a, or a free arc from (a, ga) is tangent at s.
  auto left_starts = [&](ArcKind k) {
    std::vector<std::pair<double, std::optional<Quad>>> r;
    const Quad& ob = obstacle(k);
    if (std::abs(ob.value(a) - st.ga) <= st.tol()) r.emplace_back(a, std::nullopt);
    for (double s : roots_on([&](double s) { return tangent_arc(ob, s, c).value(a) - st.ga; }, a, b)) {
      if (s > a) r.emplace_back(s, tangent_arc(ob, s, c));
    }
    return r;
  };
  auto right_ends = [&](ArcKind k) {
    std::vector<std::pair<double, std::optional<Quad>>> r;
    const Quad& ob = obstacle(k);
    if (std::abs(ob.value(b) - st.gb) <= st.tol()) r.emplace_back(b, std::nullopt);
    for (double s : roots_on([&](double s) { return tangent_arc(ob, s, c).value(b) - st.gb; }, a, b)) {
      if (s < b) r.emplace_back(s, tangent_arc(ob, s, c));
    }
    return r;
  };
  auto prefix = [&](double s, const std::optional<Quad>& q) {
    std::vector<Arc> arcs;
    if (q) arcs.push_back(make_arc(a, s, ArcKind::Free, *q));
    return arcs;
  };

  // One contact arc.
  for (ArcKind k : {ArcKind::LowerContact, ArcKind::UpperContact}) {
    for (const auto& [s, ql] : left_starts(k)) {
      for (const auto& [t, qr] : right_ends(k)) {
        if (t < s) continue;
        std::vector<Arc> arcs = prefix(s, ql);
        arcs.push_back(make_arc(s, t, k, obstacle(k)));
        if (qr) arcs.push_back(make_arc(t, b, ArcKind::Free, *qr));
        out.push_back(std::move(arcs));
      }
    }
  }

  // Two contact arcs joined by a free arc.
  for (ArcKind first : {ArcKind::LowerContact, ArcKind::UpperContact}) {
    const ArcKind second = first == ArcKind::LowerContact ? ArcKind::UpperContact : ArcKind::LowerContact;
    const bool to_upper = second == ArcKind::UpperContact;
    const Quad& A = obstacle(first);
    const Quad& B = obstacle(second);
    auto gap = [&](double s) {
      double g = 1.0;
      if (!free_bridge_end(st, A, B, to_upper, s, &g)) return 1.0;
      return g;
    };
    const auto lefts = left_starts(first);
    const auto rights = right_ends(second);
    for (double s2 : roots_on(gap, a, b)) {
      const auto t = free_bridge_end(st, A, B, to_upper, s2, nullptr);
      if (!t || *t <= s2 || *t > b) continue;
      const Quad bridge = tangent_arc(A, s2, c);
      for (const auto& [s1, ql] : lefts) {
        if (s1 > s2) continue;
        for (const auto& [s4, qr] : rights) {
          if (s4 < *t) continue;
          std::vector<Arc> arcs = prefix(s1, ql);
          arcs.push_back(make_arc(s1, s2, first, A));
          arcs.push_back(make_arc(s2, *t, ArcKind::Free, bridge));
          arcs.push_back(make_arc(*t, s4, second, B));
          if (qr) arcs.push_back(make_arc(s4, b, ArcKind::Free, *qr));
          out.push_back(std::move(arcs));
        }
      }
    }
  }
  return out;
}

double assembly_distance(const std::vector<Arc>& x, const std::vector<Arc>& y, double a, double b) {
  Exact1D ex{x}, ey{y};
  double d = 0.0;
  for (int i = 0; i <= 1024; ++i) {
    const double t = a + (b - a) * i / 1024.0;
    d = std::max(d, std::abs(ex.value(t) - ey.value(t)));
  }
  return d;
}

std::vector<Arc> drop_empty(std::vector<Arc> arcs) {
  std::vector<Arc> out;
  for (const Arc& A : arcs)
    if (A.hi - A.lo > 1e-13 || arcs.size() == 1) out.push_back(A);
  if (out.empty()) out.push_back(arcs.front());
  out.front().lo = arcs.front().lo;
  out.back().hi = arcs.back().hi;
  for (std::size_t i = 1; i < out.size(); ++i) out[i].lo = out[i - 1].hi;
  return out;
}

}  // namespace

Exact1D exact_1d_solution(const ProblemSpec& p) {
  const Grid& g = p.grid();
  if (g.dim() != 1) throw ValidationError("exact 1D oracle needs a one-dimensional problem");
  const OperatorSpec& op = p.op();
  if (op.kind() != OperatorKind::TraceLinear || op.spatially_varying()) {
    throw ValidationError("exact 1D oracle needs F = a u'' with constant a");
  }
  Hessian one(1);
  one.set(0, 0, 1.0);
  const double acoef = op.eval(one, Point{0.0, 0.0, 0.0});
  const double scale = p.scale();
  double f = 0.0;
  if (p.f()) {
    f = (*p.f())[0];
    for (std::size_t k = 0; k < p.f()->size(); ++k) {
      if (std::abs((*p.f())[k] - f) > 1e-12 * std::max(1.0, std::abs(f))) {
        throw ValidationError("exact 1D oracle needs a constant source");
      }
    }
  }
  Setting st{g.lo(0), g.hi(0), p.g().front(), p.g().back(), f / acoef, scale,
             fit_quadratic(p.phi1(), "lower obstacle", scale), fit_quadratic(p.phi2(), "upper obstacle", scale)};

  std::vector<std::vector<Arc>> ok;
  for (auto& arcs : candidates(st)) {
    if (!valid_assembly(st, arcs)) continue;
    arcs = drop_empty(std::move(arcs));
    bool dup = false;
    for (const auto& o : ok) {
      if (assembly_distance(o, arcs, st.a, st.b) <= 1e-9 * scale) {
        dup = true;
        break;
      }
    }
    if (!dup) ok.push_back(std::move(arcs));
  }
  if (ok.empty()) throw Error("exact 1D oracle found no consistent assembly");
  if (ok.size() > 1) {
    std::ostringstream os;
    os << "exact 1D oracle found " << ok.size() << " consistent assemblies:";
    for (const auto& arcs : ok) os << "\n  " << Exact1D{arcs}.describe();
    throw Error(os.str());
  }
  return Exact1D{std::move(ok.front())};
}

}  // namespace olab
