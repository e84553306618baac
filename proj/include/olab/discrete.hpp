#pragma once

#include <span>
#include <vector>

#include "olab/problem.hpp"
#include "olab/sparse.hpp"

namespace olab {

// F(D2u, x_k) - f_k at interior node k; G receives dF/dM when non-null.
double equation_residual(const ProblemSpec& problem, std::span<const double> u, std::size_t k,
                         Hessian* G = nullptr);

// Appends row k of the linearized equation: the stencil weights of
// G.dot(D2 du) at node k, restricted to nodes with col_of[node] >= 0, plus
// `diag_extra` on the diagonal. Every stencil position is emitted even when its
// weight is zero so the pattern does not depend on G.
void append_stencil_row(CsrBuilder& builder, const Grid& grid, const Hessian& G, std::size_t k,
                        const std::vector<int>& col_of, double diag_extra);

// Max over interior nodes and axes of |u(x+h e_a) - 2u(x) + u(x-h e_a)| / h_a^2.
double max_second_difference(const ScalarField& u);

}  // namespace olab
