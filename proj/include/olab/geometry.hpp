#pragma once

#include <vector>

#include "olab/grid.hpp"

namespace olab {

struct Point2 {
  double x = 0.0, y = 0.0;
};

// Andrew's monotone chain; counter-clockwise, no repeated or collinear
// vertices. Fewer than three distinct points come back as-is (deduplicated).
std::vector<Point2> convex_hull(std::vector<Point2> pts);

// Least distance between two parallel lines enclosing the polygon, by
// rotating calipers over the hull edges. 0 for fewer than three vertices.
double hull_width(const std::vector<Point2>& hull);

// Minimal slab width of a point set: exact for dim 1 and 2; for dim 3 the
// minimum over a 2-degree direction grid refined by local search, which
// overestimates by at most diameter * (1 - cos 1deg).
double minimal_width(const std::vector<Point>& pts, int dim);

}  // namespace olab
