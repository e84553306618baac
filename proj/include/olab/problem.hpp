#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "olab/grid.hpp"
#include "olab/operators.hpp"

namespace olab {

enum class ProblemForm { General, Reduced };

// Double obstacle problem on a box:
//   phi1 <= u <= phi2,  F(D2u, x) - f >= 0 where u > phi1,
//   F(D2u, x) - f <= 0 where u < phi2,  u = g on the boundary.
// f is 0 when absent. Reduced form additionally has phi1 == 0.
class ProblemSpec {
 public:
  // g holds one value per boundary node, in increasing flat order (see
  // boundary_nodes()). Throws ValidationError naming the worst node when the
  // obstacles cross or g leaves [phi1, phi2].
  ProblemSpec(OperatorSpec op, ScalarField phi1, ScalarField phi2, std::vector<double> g,
              std::optional<ScalarField> f, ProblemForm form);

  // Boundary data taken from a full nodal field (interior values ignored).
  static ProblemSpec with_boundary_field(OperatorSpec op, ScalarField phi1, ScalarField phi2,
                                         const ScalarField& g, std::optional<ScalarField> f,
                                         ProblemForm form);

  const Grid& grid() const noexcept { return phi1_.grid(); }
  const OperatorSpec& op() const noexcept { return op_; }
  const ScalarField& phi1() const noexcept { return phi1_; }
  const ScalarField& phi2() const noexcept { return phi2_; }
  const std::vector<double>& g() const noexcept { return g_; }
  const std::optional<ScalarField>& f() const noexcept { return f_; }
  ProblemForm form() const noexcept { return form_; }

  double source(std::size_t k) const noexcept { return f_ ? (*f_)[k] : 0.0; }
  Site site(std::size_t k) const noexcept {
    return Site{grid().node(k), static_cast<std::ptrdiff_t>(k)};
  }
  const std::vector<std::size_t>& boundary_nodes() const noexcept { return boundary_; }
  const std::vector<std::size_t>& interior_nodes() const noexcept { return interior_; }

  // Copy of `values` with the boundary entries replaced by g.
  std::vector<double> apply_boundary(std::vector<double> values) const;

  // max(|phi1|, |phi2|, |g|) over all nodes, floored at 1e-300.
  double scale() const noexcept;

 private:
  OperatorSpec op_;
  ScalarField phi1_, phi2_;
  std::vector<double> g_;
  std::optional<ScalarField> f_;
  ProblemForm form_;
  std::vector<std::size_t> boundary_, interior_;
};

// Subtracts the lower obstacle: operator FrozenShift(F, D2 phi1), obstacles
// 0 and psi = phi2 - phi1, source f - F(D2 phi1), boundary g - phi1. D2 phi1
// on boundary nodes is copied from the nearest interior node; it never enters
// interior residuals.
ProblemSpec reduce_problem(const ProblemSpec& problem);

// Discrete Hessian at every node (boundary nodes take the value at the
// nearest interior node).
std::vector<Hessian> hessian_field(const ScalarField& field);

}  // namespace olab
