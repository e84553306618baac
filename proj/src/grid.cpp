#include "olab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "olab/error.hpp"

namespace olab {

Grid Grid::build(std::span<const double> lo, std::span<const double> hi,
                 std::span<const int> counts) {
  const auto n = lo.size();
  if (n == 0 || n > static_cast<std::size_t>(kMaxDim)) {
    throw ValidationError("grid dimension must be 1, 2 or 3 (got " + std::to_string(n) + ")");
  }
  if (hi.size() != n || counts.size() != n) {
    std::ostringstream os;
    os << "grid dimension mismatch: lo has " << n << " entries, hi " << hi.size()
       << ", counts " << counts.size();
    throw ValidationError(os.str());
  }
  Grid g;
  g.dim_ = static_cast<int>(n);
  for (std::size_t a = 0; a < n; ++a) {
    if (counts[a] < 3) {
      throw ValidationError("grid counts must be >= 3 (axis " + std::to_string(a) + " has " +
                            std::to_string(counts[a]) + ")");
    }
    if (!std::isfinite(lo[a]) || !std::isfinite(hi[a]) || !(hi[a] > lo[a])) {
      std::ostringstream os;
      os << "degenerate grid box on axis " << a << ": lo=" << lo[a] << ", hi=" << hi[a];
      throw ValidationError(os.str());
    }
    g.lo_[a] = lo[a];
    g.hi_[a] = hi[a];
    g.counts_[a] = counts[a];
    g.h_[a] = (hi[a] - lo[a]) / (counts[a] - 1);
  }
  std::size_t s = 1;
  for (int a = kMaxDim - 1; a >= 0; --a) {
    g.stride_[a] = s;
    s *= static_cast<std::size_t>(g.counts_[a]);
  }
  g.size_ = s;
  return g;
}

double Grid::min_h() const noexcept {
  double m = h_[0];
  for (int a = 1; a < dim_; ++a) m = std::min(m, h_[a]);
  return m;
}

double Grid::max_h() const noexcept {
  double m = h_[0];
  for (int a = 1; a < dim_; ++a) m = std::max(m, h_[a]);
  return m;
}

std::size_t Grid::flat(const Index& idx) const noexcept {
  std::size_t k = 0;
  for (int a = 0; a < dim_; ++a) k += static_cast<std::size_t>(idx[a]) * stride_[a];
  return k;
}

Index Grid::unflat(std::size_t k) const noexcept {
  Index idx{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    idx[a] = static_cast<int>(k / stride_[a]);
    k %= stride_[a];
  }
  return idx;
}

double Grid::coord(int axis, int i) const noexcept {
  if (i == counts_[axis] - 1) return hi_[axis];
  return lo_[axis] + i * h_[axis];
}

Point Grid::node(const Index& idx) const noexcept {
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[a] = coord(a, idx[a]);
  return p;
}

bool Grid::on_boundary(const Index& idx) const noexcept {
  for (int a = 0; a < dim_; ++a) {
    if (idx[a] == 0 || idx[a] == counts_[a] - 1) return true;
  }
  return false;
}

bool Grid::is_interior(const Index& idx, int margin) const noexcept {
  for (int a = 0; a < dim_; ++a) {
    if (idx[a] < margin || idx[a] > counts_[a] - 1 - margin) return false;
  }
  return true;
}

bool Grid::contains(const Point& p, double slack) const noexcept {
  for (int a = 0; a < dim_; ++a) {
    if (p[a] < lo_[a] - slack || p[a] > hi_[a] + slack) return false;
  }
  return true;
}

std::vector<double> Grid::lo_vector() const { return {lo_.begin(), lo_.begin() + dim_}; }
std::vector<double> Grid::hi_vector() const { return {hi_.begin(), hi_.begin() + dim_}; }
std::vector<int> Grid::count_vector() const { return {counts_.begin(), counts_.begin() + dim_}; }

bool Grid::operator==(const Grid& o) const noexcept {
  if (dim_ != o.dim_) return false;
  for (int a = 0; a < dim_; ++a) {
    if (lo_[a] != o.lo_[a] || hi_[a] != o.hi_[a] || counts_[a] != o.counts_[a]) return false;
  }
  return true;
}

Grid Grid::refined(int factor) const {
  if (factor < 1) throw ValidationError("grid refinement factor must be >= 1");
  std::vector<int> c = count_vector();
  for (auto& ci : c) ci = (ci - 1) * factor + 1;
  return build(lo_vector(), hi_vector(), c);
}

ScalarField::ScalarField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw ValidationError("field has " + std::to_string(values_.size()) + " values for a grid of " +
                          std::to_string(grid_.size()) + " nodes");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw ValidationError("field value at node " + std::to_string(k) + " is not finite");
    }
  }
}

ScalarField ScalarField::constant(const Grid& grid, double value) {
  return ScalarField(grid, std::vector<double>(grid.size(), value));
}

ScalarField ScalarField::sample(const Grid& grid, const std::function<double(const Point&)>& fn) {
  std::vector<double> v(grid.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = fn(grid.node(k));
  return ScalarField(grid, std::move(v));
}

double ScalarField::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::max_value() const noexcept {
  return *std::max_element(values_.begin(), values_.end());
}

double ScalarField::min_value() const noexcept {
  return *std::min_element(values_.begin(), values_.end());
}

Hessian Hessian::identity(int dim) noexcept {
  Hessian h(dim);
  for (int i = 0; i < dim; ++i) h.set(i, i, 1.0);
  return h;
}

Hessian Hessian::diagonal(std::span<const double> d) {
  if (d.empty() || d.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ValidationError("diagonal matrix needs 1 to 3 entries");
  }
  Hessian h(static_cast<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) h.set(int(i), int(i), d[i]);
  return h;
}

Hessian Hessian::from_row_major(int dim, std::span<const double> m) {
  if (dim < 1 || dim > kMaxDim || m.size() != static_cast<std::size_t>(dim * dim)) {
    throw ValidationError("matrix size does not match dimension");
  }
  Hessian h(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) h.set(i, j, m[i * dim + j]);
  return h;
}

double Hessian::trace() const noexcept {
  double t = 0.0;
  for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
  return t;
}

double Hessian::frobenius_norm() const noexcept { return std::sqrt(dot(*this)); }

bool Hessian::all_finite() const noexcept {
  for (int i = 0; i < dim_; ++i)
    for (int j = i; j < dim_; ++j)
      if (!std::isfinite((*this)(i, j))) return false;
  return true;
}

Hessian Hessian::operator+(const Hessian& o) const noexcept {
  Hessian r(dim_);
  for (std::size_t s = 0; s < upper_.size(); ++s) r.upper_[s] = upper_[s] + o.upper_[s];
  return r;
}

Hessian Hessian::operator-(const Hessian& o) const noexcept {
  Hessian r(dim_);
  for (std::size_t s = 0; s < upper_.size(); ++s) r.upper_[s] = upper_[s] - o.upper_[s];
  return r;
}

Hessian Hessian::operator*(double s) const noexcept {
  Hessian r(dim_);
  for (std::size_t i = 0; i < upper_.size(); ++i) r.upper_[i] = upper_[i] * s;
  return r;
}

double Hessian::dot(const Hessian& o) const noexcept {
  double s = 0.0;
  for (int i = 0; i < dim_; ++i) {
    s += (*this)(i, i) * o(i, i);
    for (int j = i + 1; j < dim_; ++j) s += 2.0 * (*this)(i, j) * o(i, j);
  }
  return s;
}

InterpolationStencil interpolation_stencil(const Grid& g, const Point& p) {
  const int n = g.dim();
  std::array<int, kMaxDim> base{0, 0, 0};
  std::array<double, kMaxDim> w{0.0, 0.0, 0.0};
  for (int a = 0; a < n; ++a) {
    const double slack = 1e-12 * (g.hi(a) - g.lo(a));
    if (!(p[a] >= g.lo(a) - slack && p[a] <= g.hi(a) + slack)) {
      std::ostringstream os;
      os << "point outside grid box: coordinate " << a << " = " << p[a] << " not in ["
         << g.lo(a) << ", " << g.hi(a) << "]";
      throw DomainError(os.str(), a, p[a]);
    }
    double t = (p[a] - g.lo(a)) / g.h(a);
    const double r = std::round(t);
    if (std::abs(t - r) <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, r)) t = r;
    t = std::clamp(t, 0.0, double(g.count(a) - 1));
    int i = static_cast<int>(std::floor(t));
    if (i > g.count(a) - 2) i = g.count(a) - 2;
    base[a] = i;
    w[a] = t - i;
  }
  InterpolationStencil st;
  const int corners = 1 << n;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::size_t k = 0;
    for (int a = 0; a < n; ++a) {
      const int bit = (c >> a) & 1;
      weight *= bit ? w[a] : 1.0 - w[a];
      k += static_cast<std::size_t>(base[a] + bit) * g.stride(a);
    }
    if (weight != 0.0) {
      st.node[st.size] = k;
      st.weight[st.size] = weight;
      ++st.size;
    }
  }
  return st;
}

double interpolate(const ScalarField& field, const Point& p) {
  const auto st = interpolation_stencil(field.grid(), p);
  double acc = 0.0;
  for (int i = 0; i < st.size; ++i) acc += st.weight[i] * field[st.node[i]];
  return acc;
}

Hessian discrete_hessian(const Grid& grid, std::span<const double> v, std::size_t k) noexcept {
  const int n = grid.dim();
  Hessian H(n);
  const double u0 = v[k];
  for (int a = 0; a < n; ++a) {
    const std::size_t sa = grid.stride(a);
    const double ha = grid.h(a);
    H.set(a, a, (v[k + sa] - 2.0 * u0 + v[k - sa]) / (ha * ha));
    for (int b = a + 1; b < n; ++b) {
      const std::size_t sb = grid.stride(b);
      const double hb = grid.h(b);
      const double cross = v[k + sa + sb] - v[k + sa - sb] - v[k - sa + sb] + v[k - sa - sb];
      H.set(a, b, cross / (4.0 * ha * hb));
    }
  }
  return H;
}

Hessian discrete_hessian(const ScalarField& field, const Index& idx) {
  const Grid& g = field.grid();
  if (!g.is_interior(idx)) {
    std::ostringstream os;
    os << "discrete_hessian needs an interior node; got index (";
    for (int a = 0; a < g.dim(); ++a) os << (a ? "," : "") << idx[a];
    os << ")";
    throw ValidationError(os.str());
  }
  return discrete_hessian(g, field.values(), g.flat(idx));
}

Point central_gradient(const Grid& grid, std::span<const double> v, std::size_t k) noexcept {
  Point grad{0.0, 0.0, 0.0};
  const Index idx = grid.unflat(k);
  for (int a = 0; a < grid.dim(); ++a) {
    const std::size_t s = grid.stride(a);
    const double h = grid.h(a);
    if (idx[a] == 0) {
      grad[a] = (v[k + s] - v[k]) / h;
    } else if (idx[a] == grid.count(a) - 1) {
      grad[a] = (v[k] - v[k - s]) / h;
    } else {
      grad[a] = (v[k + s] - v[k - s]) / (2.0 * h);
    }
  }
  return grad;
}

double dot(const Point& a, const Point& b, int dim) noexcept {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

double norm(const Point& a, int dim) noexcept { return std::sqrt(dot(a, a, dim)); }

}  // namespace olab
