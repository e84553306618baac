#include "olab/symeig.hpp"

#include <algorithm>
#include <cmath>

#include "olab/error.hpp"

namespace olab {

SymEig symmetric_eigen(const Hessian& H) {
  if (!H.all_finite()) throw NumericalError("eigen-decomposition of a matrix with non-finite entries");
  const int n = H.dim();
  double a[kMaxDim][kMaxDim] = {};
  double v[kMaxDim][kMaxDim] = {};
  for (int i = 0; i < n; ++i) {
    v[i][i] = 1.0;
    for (int j = 0; j < n; ++j) a[i][j] = H(i, j);
  }
  const double tol = 1e-12 * H.frobenius_norm();

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(a[p][q]));
    if (off <= tol) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) <= tol) continue;
        // Rotation zeroing a[p][q]: t = tan(theta), smaller root.
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        a[p][q] = a[q][p] = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::array<int, kMaxDim> order{0, 1, 2};
  std::sort(order.begin(), order.begin() + n, [&](int i, int j) { return a[i][i] < a[j][j]; });
  SymEig out;
  out.dim = n;
  for (int j = 0; j < n; ++j) {
    out.values[j] = a[order[j]][order[j]];
    for (int i = 0; i < n; ++i) out.vectors[i][j] = v[i][order[j]];
  }
  return out;
}

std::array<double, kMaxDim> symmetric_eigenvalues(const Hessian& H) {
  return symmetric_eigen(H).values;
}

}  // namespace olab
