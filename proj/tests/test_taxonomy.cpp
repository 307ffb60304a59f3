#include "himoc/taxonomy.hpp"

#include <gtest/gtest.h>

#include "json.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace himoc;

namespace {

const std::vector<std::string>& cols() {
  static const auto c = character_names();
  return c;
}

// ordinary residential medians with a few knobs
MorphotopeProfile profile(int id, double area = 150, double perim = 50) {
  MorphotopeProfile p;
  p.id = id;
  p.medians.assign(cols().size(), 1.0);
  p.medians[0] = area;
  p.medians[1] = perim;
  p.extras = {0, 5000, 800};
  p.member_count = 80;
  return p;
}

// profile whose clustering features are exactly `f` (61 values)
MorphotopeProfile from_features(int id, const std::vector<double>& f) {
  MorphotopeProfile p;
  p.id = id;
  p.medians.assign(f.begin(), f.end() - 2);
  p.extras.likely_occupied = static_cast<int>(f[f.size() - 2]);
  p.extras.area_top10 = f.back();
  return p;
}

Standardizer identity(std::size_t dim) {
  Standardizer st;
  st.mean.assign(dim, 0.0);
  st.sd.assign(dim, 1.0);
  return st;
}

std::vector<MorphotopeProfile> blobs(std::mt19937_64& rng, std::size_t count, std::size_t per, double spread) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<MorphotopeProfile> out;
  for (std::size_t b = 0; b < count; ++b) {
    for (std::size_t i = 0; i < per; ++i) {
      std::vector<double> f(61);
      for (std::size_t k = 0; k < f.size(); ++k) f[k] = noise(rng) + (k % count == b ? spread : 0.0);
      f[59] = 0;  // LOA stays a flag
      out.push_back(from_features(static_cast<int>(out.size()), f));
    }
  }
  return out;
}

std::vector<int> iota_ids(std::size_t n) {
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

bool refines(const std::vector<int>& fine, const std::vector<int>& coarse) {
  std::map<int, int> parent;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    auto [it, fresh] = parent.emplace(fine[i], coarse[i]);
    if (!fresh && it->second != coarse[i]) return false;
  }
  return true;
}

}  // namespace

TEST(Profiles, ColumnMedians) {
  FeatureTable t({0, 1, 2, 3, 4, 5}, {"a", "b"});
  const double a[] = {100, 300, 200, 7, 1, 2};
  for (std::size_t i = 0; i < 6; ++i) {
    t.at(i, 0) = a[i];
    t.at(i, 1) = 4.0;
  }
  const std::vector<int> labels{0, 0, 0, 1, 1, kNoise};
  const auto p = profile_morphotopes(labels, t, {{1, 10, 20}, {0, 1, 2}});
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].medians[0], 200.0);
  EXPECT_EQ(p[0].medians[1], 4.0);
  EXPECT_EQ(p[0].member_count, 3u);
  EXPECT_EQ(p[0].extras.likely_occupied, 1);
  EXPECT_EQ(p[1].medians[0], 4.0);  // even count averages the middle pair
  EXPECT_EQ(p[1].id, 1);
  EXPECT_THROW(profile_morphotopes(labels, t, {{}}), Error);
}

TEST(Profiles, WorkerCountDoesNotMatter) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 100);
  std::vector<Id> ids(300);
  std::iota(ids.begin(), ids.end(), 0);
  FeatureTable t(ids, {"a", "b", "c"});
  std::vector<int> labels(300);
  for (std::size_t i = 0; i < 300; ++i) {
    labels[i] = static_cast<int>(i % 7) - 1;
    for (std::size_t c = 0; c < 3; ++c) t.at(i, c) = u(rng);
  }
  std::vector<MorphotopeExtras> ex(6);
  const auto a = profile_morphotopes(labels, t, ex, 1), b = profile_morphotopes(labels, t, ex, 4);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].medians, b[i].medians);
}

TEST(Profiles, NoiseGroupsAreComponents) {
  ContiguityGraph g(7);
  for (std::size_t i = 0; i + 1 < 7; ++i) g.add_edge(i, i + 1);
  const std::vector<int> labels{kNoise, kNoise, 0, kNoise, 1, kNoise, kNoise};
  const auto groups = noise_groups(labels, g);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(groups[1], (std::vector<std::size_t>{3}));
  EXPECT_EQ(groups[2], (std::vector<std::size_t>{5, 6}));
}

TEST(Outliers, Thresholds) {
  EXPECT_FALSE(is_outlier(profile(0), cols(), {}));
  EXPECT_TRUE(is_outlier(profile(0, 15), cols(), {}));
  EXPECT_TRUE(is_outlier(profile(0, 150, 6000), cols(), {}));
  auto long_net = profile(0);
  long_net.extras.perim_top10 = 200001;
  EXPECT_TRUE(is_outlier(long_net, cols(), {}));
  auto big = profile(0);
  big.extras.area_top10 = 600000;
  EXPECT_TRUE(is_outlier(big, cols(), {}));
  TaxonomyConfig literal;
  literal.area_top10_max = 500;
  EXPECT_TRUE(is_outlier(profile(0), cols(), literal));
}

TEST(Outliers, OrderIndependentAndIdempotent) {
  std::vector<MorphotopeProfile> ps;
  for (int i = 0; i < 12; ++i) ps.push_back(profile(i, i % 3 == 0 ? 10.0 : 150.0, i % 4 == 0 ? 9000.0 : 50.0));
  const auto s = exclude_outliers(ps, cols());
  std::set<int> kept;
  for (const auto& p : s.kept) kept.insert(p.id);
  auto rev = ps;
  std::reverse(rev.begin(), rev.end());
  std::set<int> kept_rev;
  for (const auto& p : exclude_outliers(rev, cols()).kept) kept_rev.insert(p.id);
  EXPECT_EQ(kept, kept_rev);
  const auto again = exclude_outliers(s.kept, cols());
  EXPECT_EQ(again.kept.size(), s.kept.size());
  EXPECT_TRUE(again.demoted.empty());
  EXPECT_EQ(s.kept.size() + s.demoted.size(), ps.size());
}

TEST(Standardize, PopulationZScores) {
  auto a = profile(0), b = profile(1);
  a.medians[2] = 1;
  b.medians[2] = 3;
  const auto z = standardize({a, b});
  ASSERT_EQ(z.cols, 61u);
  EXPECT_EQ(clustering_feature_names(cols()).size(), 61u);
  EXPECT_DOUBLE_EQ(z(0, 2), -1.0);
  EXPECT_DOUBLE_EQ(z(1, 2), 1.0);
  EXPECT_EQ(z(0, 5), 0.0);  // constant
  EXPECT_EQ(z(1, 60), 0.0);
}

TEST(Taxonomy, KnnGraphIsUnionSymmetric) {
  std::mt19937_64 rng(9);
  const auto z = standardize(blobs(rng, 2, 15, 0.5));
  const auto g = knn_graph(z, 10);
  for (std::size_t v = 0; v < g.size(); ++v) EXPECT_GE(g.degree(v), 10u);
}

TEST(Taxonomy, SeparatedBlobsMergeInternallyFirst) {
  std::mt19937_64 rng(17);
  const auto ps = blobs(rng, 3, 20, 12.0);
  const auto tree = build_taxonomy(standardize(ps), iota_ids(60));
  const auto& d = tree.dendrogram;
  ASSERT_EQ(d.merges.size(), 59u);
  std::vector<std::set<std::size_t>> blob(60 + 59);
  for (std::size_t i = 0; i < 60; ++i) blob[i] = {i / 20};
  for (std::size_t k = 0; k < 59; ++k) {
    blob[60 + k] = blob[d.merges[k].a];
    blob[60 + k].insert(blob[d.merges[k].b].begin(), blob[d.merges[k].b].end());
    if (k < 57) EXPECT_EQ(blob[60 + k].size(), 1u) << "merge " << k;
  }
  const auto cut = flat_cut(tree, 3);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(cut.labels[i], static_cast<int>(i / 20));
}

TEST(Taxonomy, DisconnectedNeighbourGraphIsJoinedAtTop) {
  std::mt19937_64 rng(3);
  const auto ps = blobs(rng, 2, 15, 30.0);
  const auto tree = build_taxonomy(standardize(ps), iota_ids(30), 10);
  EXPECT_EQ(tree.joins, 1u);
  ASSERT_EQ(tree.dendrogram.merges.size(), 29u);
  const auto& last = tree.dendrogram.merges.back();
  EXPECT_EQ(last.size, 30u);
  for (const auto& m : tree.dendrogram.merges) EXPECT_LE(m.height, last.height);
}

TEST(Taxonomy, DuplicatesMergeFirstAtZero) {
  std::mt19937_64 rng(4);
  auto ps = blobs(rng, 2, 8, 3.0);
  ps.push_back(ps[5]);
  const auto tree = build_taxonomy(standardize(ps), iota_ids(ps.size()));
  const auto& first = tree.dendrogram.merges.front();
  EXPECT_EQ(first.height, 0.0);
  EXPECT_EQ(first.a, 5u);
  EXPECT_EQ(first.b, 16u);
}

TEST(Taxonomy, CutsAreNested) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    const auto ps = blobs(rng, 4, 12, 2.0 * rep);
    const auto tree = build_taxonomy(standardize(ps), iota_ids(ps.size()), 4);
    const auto one = flat_cut(tree, 1);
    EXPECT_EQ(std::set<int>(one.labels.begin(), one.labels.end()).size(), 1u);
    const auto all = flat_cut(tree, ps.size());
    EXPECT_EQ(all.labels, iota_ids(ps.size()));
    std::vector<int> coarse = one.labels;
    for (std::size_t k = 2; k <= ps.size(); ++k) {
      const auto fine = flat_cut(tree, k);
      EXPECT_EQ(std::set<int>(fine.labels.begin(), fine.labels.end()).size(), k);
      EXPECT_EQ(fine.roots.size(), k);
      EXPECT_TRUE(refines(fine.labels, coarse)) << "K=" << k;
      coarse = fine.labels;
    }
  }
  EXPECT_THROW(flat_cut(build_taxonomy(Matrix(3, 2), iota_ids(3)), 4), Error);
}

TEST(Taxonomy, AffineRescalingKeepsMergeSequence) {
  std::mt19937_64 rng(21);
  const auto ps = blobs(rng, 3, 10, 2.0);
  std::uniform_real_distribution<double> scale(0.1, 50.0), shift(-100, 100);
  std::vector<double> s(61), o(61);
  for (std::size_t k = 0; k < 61; ++k) {
    s[k] = scale(rng) * (k % 5 == 0 ? -1.0 : 1.0);
    o[k] = shift(rng);
  }
  s[59] = 1;
  o[59] = 0;  // LOA is an integer flag
  std::vector<MorphotopeProfile> moved;
  for (const auto& p : ps) {
    auto f = clustering_features(p);
    for (std::size_t k = 0; k < 61; ++k) f[k] = f[k] * s[k] + o[k];
    moved.push_back(from_features(p.id, f));
  }
  const auto a = build_taxonomy(standardize(ps), iota_ids(30));
  const auto b = build_taxonomy(standardize(moved), iota_ids(30));
  ASSERT_EQ(a.dendrogram.merges.size(), b.dendrogram.merges.size());
  for (std::size_t k = 0; k < a.dendrogram.merges.size(); ++k) {
    EXPECT_EQ(a.dendrogram.merges[k].a, b.dendrogram.merges[k].a);
    EXPECT_EQ(a.dendrogram.merges[k].b, b.dendrogram.merges[k].b);
  }
}

TEST(NoiseAssignment, MajorityAndTieRule) {
  // kept rows on the first axis at 1..5
  auto kept_at = [](std::vector<double> xs) {
    Matrix z(xs.size(), 61);
    for (std::size_t i = 0; i < xs.size(); ++i) z(i, 0) = xs[i];
    return z;
  };
  const auto z = kept_at({1, 2, 3, 4, 5, 40});
  const auto q = from_features(0, std::vector<double>(61, 0.0));
  const auto st = identity(61);
  EXPECT_EQ(assign_noise({q}, st, z, {7, 7, 7, 7, 7, 1}), (std::vector<int>{7}));
  EXPECT_EQ(assign_noise({q}, st, z, {1, 2, 1, 2, 3, 2}), (std::vector<int>{1}));
  EXPECT_EQ(assign_noise({q}, st, z, {2, 1, 1, 2, 3, 1}), (std::vector<int>{2}));
  EXPECT_EQ(assign_noise({q}, st, z, {1, 2, 2, 1, 2, 1}), (std::vector<int>{2}));
  EXPECT_EQ(assign_noise({q, q}, st, z, {7, 7, 7, 7, 7, 1}, 5, true), (std::vector<int>{kNoise, kNoise}));
}

TEST(Export, JsonNestsAndCarriesNames) {
  std::mt19937_64 rng(2);
  auto tree = build_taxonomy(standardize(blobs(rng, 2, 4, 5.0)), {10, 11, 12, 13, 14, 15, 16, 17});
  const auto root = tree.node_count() - 1;
  tree.names = parse_branch_names("{\"" + std::to_string(root) + "\": \"Everything\"}");
  const auto j = nlohmann::json::parse(taxonomy_to_json(tree));
  EXPECT_EQ(j["name"], "Everything");
  EXPECT_EQ(j["size"], 8);
  EXPECT_EQ(j["level"], 0);
  std::vector<const nlohmann::json*> stack{&j};
  std::set<int> leaves;
  while (!stack.empty()) {
    const auto* n = stack.back();
    stack.pop_back();
    if (n->contains("children")) {
      for (const auto& c : (*n)["children"]) stack.push_back(&c);
    } else {
      leaves.insert((*n)["morphotope"].get<int>());
    }
  }
  EXPECT_EQ(leaves, (std::set<int>{10, 11, 12, 13, 14, 15, 16, 17}));
  EXPECT_EQ(parse_branch_names(branch_names_to_json(tree.names)), tree.names);
  EXPECT_THROW(parse_branch_names("{\"x\": \"y\"}"), Error);
  EXPECT_THROW(parse_branch_names("[1]"), Error);
  const auto csv = cut_to_csv(tree, flat_cut(tree, 1));
  EXPECT_EQ(csv.substr(0, 28), "morphotope_id,branch\n10,0\n11");
}
