#pragma once

#include <array>

#include "olab/grid.hpp"

namespace olab {

// Eigen-decomposition of a symmetric matrix of size <= 3 by cyclic Jacobi
// rotations. Eigenvalues are sorted ascending; column j of `vectors` (row-major
// vectors[i][j]) is the unit eigenvector for values[j].
struct SymEig {
  int dim = 0;
  std::array<double, kMaxDim> values{};
  std::array<std::array<double, kMaxDim>, kMaxDim> vectors{};
};

// Iterates until every off-diagonal entry is <= 1e-12 * ||H||_F. Throws
// NumericalError on non-finite input.
SymEig symmetric_eigen(const Hessian& H);

// Eigenvalues only, same algorithm.
std::array<double, kMaxDim> symmetric_eigenvalues(const Hessian& H);

}  // namespace olab
