#include "olab/penalty.hpp"

#include <algorithm>
#include <cmath>

#include "olab/error.hpp"

namespace olab {

PenaltyFn::PenaltyFn(double eps, double bound) : eps_(eps), bound_(bound) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("penalty eps must be positive and finite");
  if (!(bound >= 0.0) || !std::isfinite(bound)) throw ValidationError("penalty bound must be nonnegative and finite");
}

double penalty_bound(const ProblemSpec& p) {
  const Grid& g = p.grid();
  double B = 0.0;
  for (std::size_t k : p.interior_nodes()) {
    const Site s = p.site(k);
    const double f = p.source(k);
    const double a = p.op().eval(discrete_hessian(g, p.phi1().values(), k), s) - f;
    const double b = p.op().eval(discrete_hessian(g, p.phi2().values(), k), s) - f;
    B = std::max({B, std::abs(a), std::abs(b)});
  }
  return B;
}

}  // namespace olab
