#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace olab {

// Square matrix in compressed sparse row form. Column indices within a row
// are strictly increasing.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<int> row_ptr;  // n + 1 entries
  std::vector<int> col;
  std::vector<double> val;

  std::vector<double> multiply(const std::vector<double>& x) const;
};

// Row-by-row builder: call add() for the entries of row r, then end_row().
// Duplicate columns in a row are summed.
class CsrBuilder {
 public:
  explicit CsrBuilder(std::size_t n);
  void add(int col, double v);
  void end_row();
  CsrMatrix finish();

 private:
  CsrMatrix m_;
  std::vector<std::pair<int, double>> row_;
};

// Direct sparse solve (LU with column approximate-minimum-degree ordering)
// followed by iterative refinement. The symbolic analysis is kept while the
// sparsity pattern stays the same.
class LinearSolver {
 public:
  LinearSolver();
  ~LinearSolver();
  LinearSolver(const LinearSolver&) = delete;
  LinearSolver& operator=(const LinearSolver&) = delete;

  // Throws NumericalError if the matrix is singular to working precision.
  void factorize(const CsrMatrix& A);

  // Returns x with |A x - b| <= 1e-10 |b| (2-norms), refining up to 5 times.
  // Throws NumericalError if the bound cannot be met.
  std::vector<double> solve(const std::vector<double>& b);

  int factorizations() const noexcept { return factorizations_; }
  int analyses() const noexcept { return analyses_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int factorizations_ = 0;
  int analyses_ = 0;
};

}  // namespace olab
