#include "olab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace olab {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double width_along(const std::vector<Point>& pts, const Point& v) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Point& p : pts) {
    const double s = p[0] * v[0] + p[1] * v[1] + p[2] * v[2];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi - lo;
}

Point spherical(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

}  // namespace

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0.0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

double hull_width(const std::vector<Point2>& hull) {
  const std::size_t m = hull.size();
  if (m < 3) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  std::size_t j = 1;
  for (std::size_t i = 0; i < m; ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % m];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    // Advance the antipodal vertex while it gets farther from edge (a, b).
    while (cross(a, b, hull[(j + 1) % m]) > cross(a, b, hull[j])) j = (j + 1) % m;
    best = std::min(best, cross(a, b, hull[j]) / len);
  }
  return best;
}

double minimal_width(const std::vector<Point>& pts, int dim) {
  if (pts.size() < 2) return 0.0;
  if (dim == 1) {
    auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                        [](const Point& a, const Point& b) { return a[0] < b[0]; });
    return (*hi)[0] - (*lo)[0];
  }
  if (dim == 2) {
    std::vector<Point2> p2;
    p2.reserve(pts.size());
    for (const Point& p : pts) p2.push_back({p[0], p[1]});
    return hull_width(convex_hull(std::move(p2)));
  }
  // Hemisphere grid at 2 degrees in both polar and (arc-length) azimuth.
  const double step = 2.0 * std::numbers::pi / 180.0;
  double best = width_along(pts, {0.0, 0.0, 1.0});
  double bt = 0.0, bp = 0.0;
  for (double th = step; th <= 0.5 * std::numbers::pi + 1e-12; th += step) {
    const int nphi = std::max(1, static_cast<int>(std::ceil(2.0 * std::numbers::pi * std::sin(th) / step)));
    for (int k = 0; k < nphi; ++k) {
      const double ph = 2.0 * std::numbers::pi * k / nphi;
      const double w = width_along(pts, spherical(th, ph));
      if (w < best) {
        best = w;
        bt = th;
        bp = ph;
      }
    }
  }
  // Pattern search in (theta, phi) around the best grid direction.
  for (double s = step; s > 1e-6; s *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (auto [dt, dp] : {std::pair{s, 0.0}, {-s, 0.0}, {0.0, s}, {0.0, -s}}) {
        const double w = width_along(pts, spherical(bt + dt, bp + dp));
        if (w < best) {
          best = w;
          bt += dt;
          bp += dp;
          moved = true;
        }
      }
    }
  }
  return best;
}

}  // namespace olab
