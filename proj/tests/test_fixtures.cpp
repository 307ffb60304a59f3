#include "himoc/fixtures.hpp"

#include "himoc/io.hpp"
#include "himoc/preprocess.hpp"

#include <gtest/gtest.h>

using namespace himoc;
using namespace himoc::fixtures;

TEST(Fixtures, CountsAndLabels) {
  SceneSpec spec;
  spec.blocks = {{Pattern::detached_grid, {0, 0}, 18, 22, 9, 11, 100, 10},
                 {Pattern::terrace_row, {180, 0}, 6, 22, 6, 10, 100, 10}};
  const auto s = generate(spec);
  EXPECT_EQ(s.footprints.size(), 200u);
  ASSERT_EQ(s.labels.size(), 200u);
  EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), 0), 100);
  EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), 1), 100);
  for (std::size_t i = 0; i < s.footprints.size(); ++i) EXPECT_EQ(s.footprints[i].id, i);
  const auto csv = labels_to_csv(s);
  EXPECT_EQ(csv.substr(0, 44), "building_id,block,pattern\n0,0,detached-grid\n");
}

TEST(Fixtures, SameSeedSameBytes) {
  const auto a = generate(four_pattern_spec(7)), b = generate(four_pattern_spec(7));
  EXPECT_EQ(io::footprints_to_geojson(a.footprints), io::footprints_to_geojson(b.footprints));
  EXPECT_EQ(io::segments_to_geojson(a.segments), io::segments_to_geojson(b.segments));
  const auto c = generate(four_pattern_spec(8));
  EXPECT_NE(io::footprints_to_geojson(a.footprints), io::footprints_to_geojson(c.footprints));
}

TEST(Fixtures, ClearanceAndNoOverlap) {
  const auto s = generate(four_pattern_spec(3));
  for (std::size_t i = 0; i < s.footprints.size(); ++i) {
    const auto& e = s.extents[static_cast<std::size_t>(s.labels[i])];
    Box b;
    bg::envelope(s.footprints[i].shape, b);
    EXPECT_GE(b.min_corner().x() - e.min_corner().x(), 1.0);
    EXPECT_GE(b.min_corner().y() - e.min_corner().y(), 1.0);
    EXPECT_GE(e.max_corner().x() - b.max_corner().x(), 1.0);
    EXPECT_GE(e.max_corner().y() - b.max_corner().y(), 1.0);
    EXPECT_TRUE(bg::is_valid(s.footprints[i].shape));
  }
  for (std::size_t i = 0; i < s.footprints.size(); ++i) {
    for (std::size_t j = i + 1; j < s.footprints.size(); ++j) {
      MultiPolygon x;
      bg::intersection(s.footprints[i].shape, s.footprints[j].shape, x);
      ASSERT_LT(bg::area(x), 1e-9) << i << " " << j;
    }
  }
  // merged street pieces are plain axis-aligned segments
  for (const auto& seg : s.segments) {
    ASSERT_EQ(seg.points.size(), 2u);
    EXPECT_TRUE(seg.points[0].x() == seg.points[1].x() || seg.points[0].y() == seg.points[1].y());
  }
}

TEST(Fixtures, PerimeterBlocksEncloseCourtyards) {
  SceneSpec spec;
  spec.blocks = {{Pattern::perimeter_block, {0, 0}, 60, 60, 10, 12, 72, 2}};
  const auto s = generate(spec);
  ASSERT_EQ(s.footprints.size(), 72u);
  const auto adj = building_adjacency(s.footprints, 0.5);
  const auto comp = adj.components();
  const std::size_t ncomp = *std::max_element(comp.begin(), comp.end()) + 1;
  EXPECT_EQ(ncomp, 4u);
  for (std::size_t c = 0; c < ncomp; ++c) {
    std::vector<Polygon> parts;
    for (std::size_t i = 0; i < comp.size(); ++i) {
      if (comp[i] == c) parts.push_back(s.footprints[i].shape);
    }
    const auto d = dissolve(parts, 0.25);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_GE(d[0].inners().size(), 1u);
  }
}

TEST(Fixtures, RejectsBadSpecs) {
  SceneSpec overlap;
  overlap.blocks = {{Pattern::detached_grid, {0, 0}, 18, 22, 9, 11, 4, 2},
                    {Pattern::detached_grid, {30, 30}, 18, 22, 9, 11, 4, 2}};
  EXPECT_THROW(generate(overlap), Error);
  SceneSpec partial;
  partial.blocks = {{Pattern::perimeter_block, {0, 0}, 60, 60, 10, 12, 20, 2}};
  EXPECT_THROW(generate(partial), Error);
  SceneSpec cramped;
  cramped.blocks = {{Pattern::detached_grid, {0, 0}, 10, 22, 9, 11, 4, 2}};
  EXPECT_THROW(generate(cramped), Error);
  SceneSpec touching;
  touching.blocks = {{Pattern::detached_grid, {0, 0}, 18, 22, 9, 11, 4, 2},
                     {Pattern::detached_grid, {36, 0}, 18, 22, 9, 11, 4, 2}};
  EXPECT_NO_THROW(generate(touching));
  EXPECT_THROW(parse_pattern("castle"), Error);
}

TEST(Fixtures, SpecJsonRoundTrip) {
  const auto spec = four_pattern_spec(11);
  const auto back = spec_from_json(spec_to_json(spec));
  EXPECT_EQ(spec_to_json(back), spec_to_json(spec));
  EXPECT_EQ(io::footprints_to_geojson(generate(back).footprints), io::footprints_to_geojson(generate(spec).footprints));
  EXPECT_THROW(spec_from_json("{\"blocks\": [{\"pattern\": \"detached-grid\"}]}"), Error);
}

TEST(AdjustedRand, KnownValues) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index({0, 0, 1, 1}, {5, 5, 3, 3}), 1.0);
  EXPECT_NEAR(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 2}), 4.0 / 7.0, 1e-12);
  EXPECT_NEAR(adjusted_rand_index({0, 0, 0, 1, 1, 1}, {0, 1, 0, 1, 0, 1}), -1.0 / 9.0, 1e-12);
  EXPECT_DOUBLE_EQ(adjusted_rand_index({1, 1, 1}, {2, 2, 2}), 1.0);
  EXPECT_THROW(adjusted_rand_index({1}, {1, 2}), Error);
}
