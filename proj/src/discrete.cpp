#include "olab/discrete.hpp"

#include <algorithm>
#include <cmath>

namespace olab {

double equation_residual(const ProblemSpec& p, std::span<const double> u, std::size_t k, Hessian* G) {
  const Hessian H = discrete_hessian(p.grid(), u, k);
  const double F = G ? p.op().eval_gradient(H, p.site(k), *G) : p.op().eval(H, p.site(k));
  return F - p.source(k);
}

void append_stencil_row(CsrBuilder& b, const Grid& g, const Hessian& G, std::size_t k,
                        const std::vector<int>& col_of, double diag_extra) {
  auto put = [&](std::size_t node, double w) {
    const int c = col_of[node];
    if (c >= 0) b.add(c, w);
  };
  double center = diag_extra;
  for (int a = 0; a < g.dim(); ++a) {
    const std::size_t sa = g.stride(a);
    const double ca = G(a, a) / (g.h(a) * g.h(a));
    put(k + sa, ca);
    put(k - sa, ca);
    center -= 2.0 * ca;
    for (int c = a + 1; c < g.dim(); ++c) {
      const std::size_t sc = g.stride(c);
      // Off-diagonal entries appear twice in G.dot(H).
      const double w = G(a, c) / (2.0 * g.h(a) * g.h(c));
      put(k + sa + sc, w);
      put(k + sa - sc, -w);
      put(k - sa + sc, -w);
      put(k - sa - sc, w);
    }
  }
  put(k, center);
  b.end_row();
}

double max_second_difference(const ScalarField& u) {
  const Grid& g = u.grid();
  const auto v = u.values();
  double m = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.on_boundary(k)) continue;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t s = g.stride(a);
      m = std::max(m, std::abs(v[k + s] - 2.0 * v[k] + v[k - s]) / (g.h(a) * g.h(a)));
    }
  }
  return m;
}

}  // namespace olab
