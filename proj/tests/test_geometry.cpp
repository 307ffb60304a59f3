#include "himoc/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace himoc;

namespace {

Polygon rect(double x0, double y0, double x1, double y1) {
  Polygon p;
  bg::append(p.outer(), Point{x0, y0});
  bg::append(p.outer(), Point{x1, y0});
  bg::append(p.outer(), Point{x1, y1});
  bg::append(p.outer(), Point{x0, y1});
  bg::append(p.outer(), Point{x0, y0});
  return p;
}

Ring ring_of(std::initializer_list<Point> pts) {
  Ring r(pts);
  r.push_back(r.front());
  return r;
}

// Midpoint-sampled even-odd coverage on a fine grid.
double raster_area(std::span<const Ring> rings, const Box& b, int n) {
  const double dx = (b.max_corner().x() - b.min_corner().x()) / n;
  const double dy = (b.max_corner().y() - b.min_corner().y()) / n;
  std::size_t hit = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Point p{b.min_corner().x() + (i + 0.5) * dx, b.min_corner().y() + (j + 0.5) * dy};
      if (even_odd_inside(p, rings)) ++hit;
    }
  }
  return static_cast<double>(hit) * dx * dy;
}

}  // namespace

TEST(Geometry, MinEnclosingCircleOfUnitSquare) {
  const Circle c = min_enclosing_circle(to_multi(rect(0, 0, 1, 1)));
  EXPECT_NEAR(c.center.x(), 0.5, 1e-12);
  EXPECT_NEAR(c.center.y(), 0.5, 1e-12);
  EXPECT_NEAR(c.radius, std::sqrt(0.5), 1e-12);
}

TEST(Geometry, MinEnclosingCircleContainsRandomPoints) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point> pts;
    for (int i = 0; i < 30; ++i) pts.emplace_back(u(rng), u(rng));
    const Circle c = min_enclosing_circle(pts);
    int on_boundary = 0;
    for (const auto& p : pts) {
      const double d = distance(p, c.center);
      EXPECT_LE(d, c.radius + 1e-9);
      if (d > c.radius - 1e-7) ++on_boundary;
    }
    EXPECT_GE(on_boundary, 2);
  }
}

TEST(Geometry, MinRotatedRectOfRotatedRectangle) {
  const double a = 0.3;
  std::vector<Point> pts;
  for (auto [x, y] : {std::pair{0.0, 0.0}, {4.0, 0.0}, {4.0, 1.0}, {0.0, 1.0}}) {
    pts.emplace_back(x * std::cos(a) - y * std::sin(a), x * std::sin(a) + y * std::cos(a));
  }
  const RotatedRect r = min_rotated_rect(pts);
  EXPECT_NEAR(r.length, 4.0, 1e-9);
  EXPECT_NEAR(r.width, 1.0, 1e-9);
}

TEST(Geometry, RepresentativePointInsideLShape) {
  Polygon l;
  for (auto [x, y] : {std::pair{0.0, 0.0}, {10.0, 0.0}, {10.0, 1.0}, {1.0, 1.0}, {1.0, 10.0}, {0.0, 10.0}, {0.0, 0.0}}) {
    bg::append(l.outer(), Point{x, y});
  }
  bg::correct(l);
  EXPECT_TRUE(bg::within(representative_point(l), l));
  Polygon donut = rect(0, 0, 10, 10);
  Ring hole = ring_of({{2, 2}, {2, 8}, {8, 8}, {8, 2}});
  donut.inners().push_back(hole);
  bg::correct(donut);
  EXPECT_TRUE(bg::within(representative_point(donut), donut));
}

TEST(Geometry, DensifyRingRespectsStep) {
  const auto pts = densify_ring(rect(0, 0, 3, 1).outer(), 0.5);
  EXPECT_EQ(pts.size(), 16u);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_LE(distance(pts[i], pts[(i + 1) % pts.size()]), 0.5 + 1e-12);
  }
}

TEST(Geometry, MakeValidBowtieMatchesEvenOddArea) {
  const Ring bowtie = ring_of({{0, 0}, {2, 2}, {2, 0}, {0, 2}});
  const std::vector<Ring> rings{bowtie};
  const MultiPolygon mp = make_valid(rings);
  EXPECT_TRUE(bg::is_valid(mp));
  EXPECT_NEAR(bg::area(mp), 2.0, 1e-6);
  EXPECT_NEAR(bg::area(mp), raster_area(rings, Box{{0, 0}, {2, 2}}, 400), 0.02);
}

TEST(Geometry, MakeValidRandomRingsPreserveEvenOddFill) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 10);
  for (int trial = 0; trial < 20; ++trial) {
    Ring r;
    for (int i = 0; i < 7; ++i) r.push_back(Point{u(rng), u(rng)});
    r.push_back(r.front());
    const std::vector<Ring> rings{r};
    const MultiPolygon mp = make_valid(rings);
    EXPECT_TRUE(bg::is_valid(mp));
    // every sample point agrees with the even-odd rule away from edges
    std::uniform_real_distribution<double> s(0, 10);
    for (int k = 0; k < 400; ++k) {
      const Point p{s(rng), s(rng)};
      bool near_edge = false;
      for (std::size_t e = 0; e + 1 < r.size(); ++e) {
        if (bg::distance(p, LineSeg(r[e], r[e + 1])) < 1e-6) near_edge = true;
      }
      if (near_edge) continue;
      EXPECT_EQ(bg::within(p, mp), even_odd_inside(p, rings));
    }
  }
}

TEST(Geometry, MakeValidKeepsValidPolygon) {
  Polygon donut = rect(0, 0, 10, 10);
  donut.inners().push_back(ring_of({{2, 2}, {2, 8}, {8, 8}, {8, 2}}));
  bg::correct(donut);
  const MultiPolygon mp = make_valid(donut);
  ASSERT_EQ(mp.size(), 1u);
  EXPECT_EQ(mp[0].inners().size(), 1u);
  EXPECT_NEAR(bg::area(mp), 64.0, 1e-9);
}

TEST(Geometry, BoundedFacesOfGrid) {
  // n vertical and n horizontal lines with overhang give (n-1)^2 faces
  for (int n : {2, 3, 4}) {
    std::vector<LineSeg> segs;
    for (int i = 0; i < n; ++i) {
      const double c = 10.0 * i;
      segs.emplace_back(Point{c, -5}, Point{c, 10.0 * (n - 1) + 5});
      segs.emplace_back(Point{-5, c}, Point{10.0 * (n - 1) + 5, c});
    }
    const auto faces = bounded_faces(node_segments(segs));
    EXPECT_EQ(faces.size(), static_cast<std::size_t>((n - 1) * (n - 1)));
    for (const auto& f : faces) EXPECT_NEAR(bg::area(f), 100.0, 1e-9);
  }
}

TEST(Geometry, BoundedFacesNestedLoopIsHole) {
  std::vector<LineSeg> segs;
  auto square = [&](double a, double b) {
    segs.emplace_back(Point{a, a}, Point{b, a});
    segs.emplace_back(Point{b, a}, Point{b, b});
    segs.emplace_back(Point{b, b}, Point{a, b});
    segs.emplace_back(Point{a, b}, Point{a, a});
  };
  square(0, 10);
  square(3, 6);
  const auto faces = bounded_faces(node_segments(segs));
  ASSERT_EQ(faces.size(), 2u);
  double total = 0;
  for (const auto& f : faces) total += bg::area(f);
  EXPECT_NEAR(total, 100.0, 1e-9);
}

TEST(Geometry, SplitPolylinesAtCrossing) {
  std::vector<Linestring> lines(2);
  lines[0] = {{0, 0}, {10, 0}};
  lines[1] = {{5, -5}, {5, 5}};
  const auto parts = split_polylines(lines);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].size(), 2u);
  EXPECT_EQ(parts[1].size(), 2u);
  EXPECT_NEAR(bg::length(parts[0][0]), 5.0, 1e-12);
}

TEST(Geometry, SharedBoundaryOfTouchingSquares) {
  EXPECT_NEAR(shared_boundary_length(rect(0, 0, 1, 1), rect(1, 0, 2, 1), 0.5), 1.0, 1e-9);
  EXPECT_NEAR(shared_boundary_length(rect(0, 0, 1, 1), rect(1, 0.5, 2, 3), 0.5), 0.5, 1e-9);
  EXPECT_NEAR(shared_boundary_length(rect(0, 0, 1, 1), rect(5, 0, 6, 1), 0.5), 0.0, 1e-12);
}

TEST(Geometry, DissolveRingOfSquaresHasCourtyard) {
  std::vector<Polygon> parts{rect(0, 0, 30, 10), rect(0, 20, 30, 30), rect(0, 10, 10, 20), rect(20, 10, 30, 20)};
  const MultiPolygon d = dissolve(parts, 0.25);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].inners().size(), 1u);
  EXPECT_NEAR(bg::area(d), 800.0, 1e-3);
}

TEST(Geometry, OverlapAreaOfRectanglesMatchesIntervals) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-50, 50), len(0.5, 40);
  for (int rep = 0; rep < 200; ++rep) {
    const double ax = u(rng), ay = u(rng), aw = len(rng), ah = len(rng);
    const double bx = u(rng), by = u(rng), bw = len(rng), bh = len(rng);
    const double ox = std::max(0.0, std::min(ax + aw, bx + bw) - std::max(ax, bx));
    const double oy = std::max(0.0, std::min(ay + ah, by + bh) - std::max(ay, by));
    const MultiPolygon a{rect(ax, ay, ax + aw, ay + ah)}, b{rect(bx, by, bx + bw, by + bh)};
    EXPECT_NEAR(overlap_area(a, b), ox * oy, 1e-6);
  }
}

TEST(Geometry, OverlapAreaOfTouchingDensifiedCells) {
  // two cells sharing a long edge: the shared side is densified differently
  // on each and the far sides zigzag, as Voronoi boundaries do
  Polygon lower, upper;
  for (int k = 0; k <= 40; ++k) lower.outer().push_back({18.0 + 0.01 * (k % 2), 22.0 + 0.55 * k});
  for (int k = 0; k <= 37; ++k) lower.outer().push_back({18.0 + 0.5 * k, 44.0});
  lower.outer().push_back({36.5, 22.0});
  bg::correct(lower);
  for (int k = 0; k <= 23; ++k) upper.outer().push_back({17.6 + 0.8 * k, 44.0});
  upper.outer().push_back({36.4, 66.0});
  upper.outer().push_back({17.95 + 0.004, 66.0});
  bg::correct(upper);
  const MultiPolygon a{lower}, b{upper};
  EXPECT_LT(overlap_area(a, b), 1e-9);
  EXPECT_NEAR(overlap_area(a, a), bg::area(a), 1e-6);
  MultiPolygon none;
  EXPECT_EQ(overlap_area(a, none), 0.0);
}
