#include "olab/sparse.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "olab/error.hpp"

namespace olab {

std::vector<double> CsrMatrix::multiply(const std::vector<double>& x) const {
  std::vector<double> y(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) s += val[p] * x[col[p]];
    y[r] = s;
  }
  return y;
}

CsrBuilder::CsrBuilder(std::size_t n) {
  m_.n = n;
  m_.row_ptr.reserve(n + 1);
  m_.row_ptr.push_back(0);
}

void CsrBuilder::add(int col, double v) { row_.emplace_back(col, v); }

void CsrBuilder::end_row() {
  std::sort(row_.begin(), row_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < row_.size();) {
    const int c = row_[i].first;
    double s = 0.0;
    while (i < row_.size() && row_[i].first == c) s += row_[i++].second;
    m_.col.push_back(c);
    m_.val.push_back(s);
  }
  m_.row_ptr.push_back(static_cast<int>(m_.col.size()));
  row_.clear();
}

CsrMatrix CsrBuilder::finish() {
  if (m_.row_ptr.size() != m_.n + 1) throw InvariantError("CsrBuilder finished with missing rows");
  return std::move(m_);
}

struct LinearSolver::Impl {
  using Mat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  Mat A;
  Eigen::SparseLU<Mat, Eigen::COLAMDOrdering<int>> lu;
  std::vector<int> pattern_rows, pattern_cols;
  CsrMatrix csr;
  bool analyzed = false;
};

LinearSolver::LinearSolver() : impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;

void LinearSolver::factorize(const CsrMatrix& m) {
  auto& I = *impl_;
  for (double v : m.val) {
    if (!std::isfinite(v)) throw NumericalError("linear system has non-finite entries");
  }
  Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> view(
      static_cast<int>(m.n), static_cast<int>(m.n), static_cast<int>(m.val.size()), m.row_ptr.data(),
      m.col.data(), m.val.data());
  I.A = view;
  I.A.makeCompressed();
  const bool same = I.analyzed && I.pattern_rows == m.row_ptr && I.pattern_cols == m.col;
  if (!same) {
    I.lu.analyzePattern(I.A);
    I.pattern_rows = m.row_ptr;
    I.pattern_cols = m.col;
    I.analyzed = true;
    ++analyses_;
  }
  I.lu.factorize(I.A);
  if (I.lu.info() != Eigen::Success) {
    throw NumericalError("sparse LU factorization failed: " + I.lu.lastErrorMessage());
  }
  I.csr = m;
  ++factorizations_;
}

std::vector<double> LinearSolver::solve(const std::vector<double>& b) {
  auto& I = *impl_;
  const std::size_t n = b.size();
  if (!I.analyzed || n != I.csr.n) throw InvariantError("solve called before factorize or with wrong size");
  Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(n));
  const double bnorm = bv.norm();
  std::vector<double> x(n, 0.0);
  if (bnorm == 0.0) return x;
  Eigen::VectorXd xv = I.lu.solve(bv);
  for (int pass = 0;; ++pass) {
    std::copy(xv.data(), xv.data() + n, x.begin());
    const std::vector<double> Ax = I.csr.multiply(x);
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = b[i] - Ax[i];
    const double rel = r.norm() / bnorm;
    if (!std::isfinite(rel)) throw NumericalError("linear solve produced non-finite values");
    if (rel <= 1e-10) return x;
    if (pass == 5) {
      throw NumericalError("linear solve missed the 1e-10 relative residual (got " + std::to_string(rel) + ")");
    }
    xv += I.lu.solve(r);
  }
}

}  // namespace olab
