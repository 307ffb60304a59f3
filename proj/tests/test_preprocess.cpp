#include "himoc/preprocess.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace himoc;
using test::house;
using test::rect;

namespace {

std::vector<double> sorted_areas(const std::vector<Footprint>& fps) {
  std::vector<double> a;
  for (const auto& f : fps) a.push_back(bg::area(f.shape));
  std::sort(a.begin(), a.end());
  return a;
}

}  // namespace

TEST(Preprocess, OverlapAboveTenPercentMerges) {
  PreprocessConfig cfg;
  cfg.merge_small_area = 0.0;
  // unit squares overlapping 15% of each
  auto [out, rep] = preprocess_buildings({house(0, 0, 0, 1, 1), house(1, 0.85, 0, 1, 1)}, cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(rep.merged_pairs, 1u);
  EXPECT_NEAR(bg::area(out[0].shape), 1.85, 1e-9);
}

TEST(Preprocess, SmallOverlapBetweenLargeBuildingsIsKept) {
  auto [out, rep] = preprocess_buildings({house(0, 0, 0, 10, 10), house(1, 9.5, 0, 10, 10)}, {});
  EXPECT_EQ(out.size(), 2u);
  EXPECT_EQ(rep.merged_pairs, 0u);
}

TEST(Preprocess, OversizedFootprintDropped) {
  auto [out, rep] = preprocess_buildings({house(0, 0, 0, 450, 450), house(1, 500, 0, 10, 10)}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(rep.dropped_large, 1u);
  EXPECT_NEAR(bg::area(out[0].shape), 100.0, 1e-9);
}

TEST(Preprocess, SmallShedMergesIntoHall) {
  // 40 m^2 shed overlapping a 2000 m^2 hall by 1 m^2
  auto [out, rep] = preprocess_buildings({house(0, 0, 0, 50, 40), house(1, 49.5, 10, 8, 5)}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(rep.merged_pairs, 1u);
}

TEST(Preprocess, IdempotentAndClosedUnderMergePredicate) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0, 120), size(3, 20);
  std::vector<Footprint> raw;
  for (Id i = 0; i < 60; ++i) raw.push_back(house(i, pos(rng), pos(rng), size(rng), size(rng)));
  PreprocessConfig cfg;
  auto [once, r1] = preprocess_buildings(raw, cfg);
  auto [twice, r2] = preprocess_buildings(once, cfg);
  ASSERT_EQ(once.size(), twice.size());
  const auto a = sorted_areas(once), b = sorted_areas(twice);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
  EXPECT_EQ(r2.merged_pairs, 0u);
  for (std::size_t i = 0; i < once.size(); ++i) {
    for (std::size_t j = i + 1; j < once.size(); ++j) {
      EXPECT_FALSE(should_merge(once[i].shape, once[j].shape, cfg)) << i << " " << j;
    }
  }
}

TEST(Preprocess, WhitelistAndTunnels) {
  std::vector<Segment> raw{test::street(0, {{0, 0}, {1, 0}}, "footway"), test::street(1, {{0, 0}, {1, 0}}, "residential"),
                           test::street(2, {{0, 0}, {1, 0}}, "primary")};
  raw[2].tunnel = true;
  auto [out, rep] = filter_segments(raw);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, "residential");
  EXPECT_EQ(out[0].id, 0u);
  EXPECT_EQ(rep.filtered_segments, 2u);
  EXPECT_EQ(street_kind_whitelist().size(), 14u);
}

TEST(Preprocess, AdjacencyThreshold) {
  std::vector<Footprint> b{house(0, 0, 0, 10, 10), house(1, 10, 0, 10, 10), house(2, 20.4, 0, 10, 10),
                           house(3, 30.4 + 0.6, 0, 10, 10)};
  const auto g = building_adjacency(b, 0.5);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(1, 2));
  EXPECT_FALSE(g.has_edge(2, 3));
  EXPECT_FALSE(g.has_edge(0, 2));
}

TEST(Preprocess, AdjacencyInvariantUnderPermutation) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(0, 60), size(2, 8);
  std::vector<Footprint> b;
  for (Id i = 0; i < 40; ++i) b.push_back(house(i, pos(rng), pos(rng), size(rng), size(rng)));
  const auto g = building_adjacency(b, 0.5);
  std::vector<std::size_t> perm(b.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Footprint> pb;
  for (auto p : perm) pb.push_back(b[p]);
  const auto h = building_adjacency(pb, 0.5);
  for (std::size_t i = 0; i < pb.size(); ++i) {
    for (std::size_t j = 0; j < pb.size(); ++j) {
      if (i != j) EXPECT_EQ(h.has_edge(i, j), g.has_edge(perm[i], perm[j]));
    }
  }
}
