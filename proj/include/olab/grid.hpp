#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace olab {

inline constexpr int kMaxDim = 3;

// Coordinates and node indices are fixed-size; components past dim() are 0.
using Point = std::array<double, kMaxDim>;
using Index = std::array<int, kMaxDim>;

// Uniform Cartesian grid over an axis-aligned box.
//
// Node storage is row-major with the last axis fastest:
//   flat = (i0 * c1 + i1) * c2 + i2.
// Every module and every file format uses this order.
class Grid {
 public:
  // Throws ValidationError on mismatched lengths, counts < 3, or hi <= lo.
  static Grid build(std::span<const double> lo, std::span<const double> hi,
                    std::span<const int> counts);

  int dim() const noexcept { return dim_; }
  double lo(int axis) const noexcept { return lo_[axis]; }
  double hi(int axis) const noexcept { return hi_[axis]; }
  int count(int axis) const noexcept { return counts_[axis]; }
  double h(int axis) const noexcept { return h_[axis]; }
  double min_h() const noexcept;
  double max_h() const noexcept;
  std::size_t size() const noexcept { return size_; }
  std::size_t stride(int axis) const noexcept { return stride_[axis]; }

  std::size_t flat(const Index& idx) const noexcept;
  Index unflat(std::size_t k) const noexcept;

  // node(last index) reproduces hi() exactly.
  Point node(const Index& idx) const noexcept;
  Point node(std::size_t k) const noexcept { return node(unflat(k)); }
  double coord(int axis, int i) const noexcept;

  bool on_boundary(const Index& idx) const noexcept;
  bool on_boundary(std::size_t k) const noexcept { return on_boundary(unflat(k)); }
  // At least `margin` nodes away from every face.
  bool is_interior(const Index& idx, int margin = 1) const noexcept;
  // Componentwise inside [lo - slack, hi + slack].
  bool contains(const Point& p, double slack = 0.0) const noexcept;

  std::vector<double> lo_vector() const;
  std::vector<double> hi_vector() const;
  std::vector<int> count_vector() const;

  // Same dimension, corners and counts.
  bool operator==(const Grid& other) const noexcept;

  // Grid over the same box with (counts - 1) * factor + 1 nodes per axis,
  // so coarse nodes stay nodes of the refined grid.
  Grid refined(int factor) const;

 private:
  Grid() = default;

  int dim_ = 0;
  std::array<double, kMaxDim> lo_{};
  std::array<double, kMaxDim> hi_{};
  std::array<int, kMaxDim> counts_{1, 1, 1};
  std::array<double, kMaxDim> h_{};
  std::array<std::size_t, kMaxDim> stride_{};
  std::size_t size_ = 0;
};

// Nodal real-valued field on a grid. Immutable once constructed; values are
// guaranteed finite.
class ScalarField {
 public:
  // Throws ValidationError when values.size() != grid.size() or any value is
  // NaN/Inf.
  ScalarField(Grid grid, std::vector<double> values);

  static ScalarField constant(const Grid& grid, double value);
  static ScalarField sample(const Grid& grid,
                            const std::function<double(const Point&)>& fn);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t k) const noexcept { return values_[k]; }
  double at(const Index& idx) const noexcept { return values_[grid_.flat(idx)]; }
  std::size_t size() const noexcept { return values_.size(); }

  double max_abs() const noexcept;
  double max_value() const noexcept;
  double min_value() const noexcept;

 private:
  Grid grid_;
  std::vector<double> values_;
};

// Symmetric n x n matrix stored as its upper triangle, so (i,j) and (j,i)
// always read the same entry.
class Hessian {
 public:
  explicit Hessian(int dim = 1) noexcept : dim_(dim) {}

  static Hessian zero(int dim) noexcept { return Hessian(dim); }
  static Hessian identity(int dim) noexcept;
  static Hessian diagonal(std::span<const double> d);
  // Reads the upper triangle of a row-major n x n array.
  static Hessian from_row_major(int dim, std::span<const double> m);

  int dim() const noexcept { return dim_; }
  double operator()(int i, int j) const noexcept { return upper_[slot(i, j)]; }
  void set(int i, int j, double v) noexcept { upper_[slot(i, j)] = v; }

  double trace() const noexcept;
  double frobenius_norm() const noexcept;
  bool all_finite() const noexcept;

  Hessian operator+(const Hessian& o) const noexcept;
  Hessian operator-(const Hessian& o) const noexcept;
  Hessian operator*(double s) const noexcept;

  // Frobenius inner product tr(A B) for symmetric A, B.
  double dot(const Hessian& o) const noexcept;

  static constexpr int slot(int i, int j) noexcept {
    if (i > j) std::swap(i, j);
    return i * (2 * kMaxDim - i - 1) / 2 + j;
  }

 private:
  int dim_;
  std::array<double, 6> upper_{};
};

// Multilinear interpolation. Exact at nodes and for affine fields; throws
// DomainError naming the first coordinate outside the box.
double interpolate(const ScalarField& field, const Point& p);

// The nodes and weights multilinear interpolation uses at p. Weights are
// nonnegative and sum to 1; zero-weight corners are dropped. Same errors as
// interpolate().
struct InterpolationStencil {
  std::array<std::size_t, 8> node{};
  std::array<double, 8> weight{};
  int size = 0;
};
InterpolationStencil interpolation_stencil(const Grid& grid, const Point& p);

// Second-order central differences at an interior node; diagonal entries use
// the 3-point stencil and off-diagonal entries the 4-point cross stencil.
// Throws ValidationError for nodes on the boundary.
Hessian discrete_hessian(const ScalarField& field, const Index& idx);

// Same stencil on raw values; `k` must be an interior node of `grid`.
Hessian discrete_hessian(const Grid& grid, std::span<const double> values,
                         std::size_t k) noexcept;

// Central-difference gradient; falls back to one-sided differences on faces.
Point central_gradient(const Grid& grid, std::span<const double> values,
                       std::size_t k) noexcept;

double dot(const Point& a, const Point& b, int dim) noexcept;
double norm(const Point& a, int dim) noexcept;

}  // namespace olab
