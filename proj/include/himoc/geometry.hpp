#pragma once

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/box.hpp>
#include <boost/geometry/geometries/linestring.hpp>
#include <boost/geometry/geometries/multi_linestring.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/segment.hpp>

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace himoc {

namespace bg = boost::geometry;

// Planar coordinates in meters. Polygons are counter-clockwise, closed.
using Point = bg::model::d2::point_xy<double>;
using Polygon = bg::model::polygon<Point, /*ClockWise=*/false, /*Closed=*/true>;
using Ring = Polygon::ring_type;
using MultiPolygon = bg::model::multi_polygon<Polygon>;
using Linestring = bg::model::linestring<Point>;
using MultiLinestring = bg::model::multi_linestring<Linestring>;
using Box = bg::model::box<Point>;
using LineSeg = bg::model::segment<Point>;

struct Circle {
  Point center{0.0, 0.0};
  double radius = 0.0;
};

/// Minimum-area rotated bounding rectangle.
struct RotatedRect {
  Ring ring;
  double length = 0.0;  // longer side
  double width = 0.0;   // shorter side
  double area() const { return length * width; }
  double perimeter() const { return 2.0 * (length + width); }
};

/// Deduplicates points: inserting within `snap` of a known point returns
/// that point's index.
class SnapIndex {
 public:
  explicit SnapIndex(double snap) : snap_(snap) {}
  int insert(const Point& p);
  const std::vector<Point>& points() const { return pts_; }

 private:
  double snap_;
  std::vector<Point> pts_;
  std::unordered_map<std::uint64_t, std::vector<int>> grid_;
};

double distance(const Point& a, const Point& b);
double cross(const Point& o, const Point& a, const Point& b);

/// Smallest circle enclosing every point (Welzl).
Circle min_enclosing_circle(std::span<const Point> pts);
Circle min_enclosing_circle(const MultiPolygon& mp);

/// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
RotatedRect min_rotated_rect(std::span<const Point> pts);
RotatedRect min_rotated_rect(const MultiPolygon& mp);

std::vector<Point> exterior_points(const MultiPolygon& mp);

/// Inserts vertices so that no edge is longer than `step`; returns the
/// open point sequence (closing duplicate dropped).
std::vector<Point> densify_ring(const Ring& ring, double step);

/// Interior point, guaranteed inside for non-degenerate areal input.
Point representative_point(const Polygon& p);
Point representative_point(const MultiPolygon& mp);

MultiPolygon to_multi(const Polygon& p);
Box envelope(const MultiPolygon& mp);
Box expand(const Box& b, double margin);

/// Even-odd parity of `pt` against every ring of `rings`.
bool even_odd_inside(const Point& pt, std::span<const Ring> rings);

/// Repairs arbitrary (possibly self-intersecting) rings into a valid
/// multipolygon whose covered set is the even-odd fill of the input rings.
MultiPolygon make_valid(std::span<const Ring> rings);
MultiPolygon make_valid(const Polygon& p);

/// Length of the boundary of `a` running along the boundary of `b`
/// (parallel edges within `tol`).
double shared_boundary_length(const Polygon& a, const Polygon& b, double tol);

/// Morphological closing (dilate then erode by `half_gap`) of the union.
MultiPolygon dissolve(std::span<const Polygon> parts, double half_gap);

/// Area of a ∩ b, computed on an integer grid (1e-9 m) so that shared and
/// collinear edges cannot break the overlay.
double overlap_area(const MultiPolygon& a, const MultiPolygon& b);

/// Splits every segment at all mutual intersections; returns unique
/// non-degenerate edges. Vertices closer than `snap` are merged.
std::vector<LineSeg> node_segments(std::span<const LineSeg> segs, double snap = 1e-6);

/// Splits each polyline wherever another polyline (or itself) crosses or
/// touches it. Returns the parts per input, in order along the input.
std::vector<std::vector<Linestring>> split_polylines(std::span<const Linestring> lines, double snap = 1e-6);

/// Groups closed point cycles into polygons: ccw cycles are shells, cw
/// cycles become holes of the smallest shell containing them.
std::vector<Polygon> assemble_rings(const std::vector<std::vector<Point>>& rings);

/// Bounded faces of the planar arrangement of already-noded edges.
/// Dangling edges are pruned. Each face is valid with bridge-cut holes.
std::vector<Polygon> bounded_faces(std::span<const LineSeg> noded, double snap = 1e-6);

}  // namespace himoc
