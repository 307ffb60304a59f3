// Acceptance runner: one timed PASS/FAIL line per criterion, non-zero exit
// if any fails.

#include "himoc/evaluation.hpp"
#include "himoc/fixtures.hpp"
#include "himoc/io.hpp"
#include "himoc/morphometrics.hpp"
#include "himoc/pipeline.hpp"
#include "himoc/sa3.hpp"
#include "himoc/taxonomy.hpp"
#include "himoc/tessellation.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace himoc;
using test::house;
using test::rect;

namespace {

constexpr double kPi = std::numbers::pi;

// Collects failed checks; the message of the first one is reported.
struct Check {
  std::vector<std::string> failures;
  std::ostringstream info;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream s;
      s << what << ": got " << got << ", want " << want << " +- " << tol;
      failures.push_back(s.str());
    }
  }
};

struct Criterion {
  int number;
  std::string title;
  double budget_s;  // 0: no runtime bound
  std::function<void(Check&)> body;
};

// 1. analytic shape characters
void shape_suite(Check& c) {
  const auto r = building_shape_chars(rect(0, 0, 7, 3));
  c.near(r.eri, 1.0, 1e-9, "rectangle ERI");
  c.near(r.squareness, 0.0, 1e-9, "rectangle squareness");
  c.near(r.corners, 4.0, 0.0, "rectangle corners");
  c.near(building_shape_chars(rect(0, 0, 1, 2)).elongation, 0.5, 1e-12, "1x2 elongation");
  c.near(building_shape_chars(rect(0, 0, 1, 1)).circular_compactness, 2.0 / kPi, 1e-6, "unit square CCo");
  c.near(linearity(Linestring{{0, 0}, {12, 5}}), 1.0, 1e-12, "straight linearity");
  Linestring arc;
  for (int k = 0; k <= 720; ++k) arc.push_back({std::cos(kPi * k / 720), std::sin(kPi * k / 720)});
  c.near(linearity(arc), 2.0 / kPi, 1e-3, "semicircle linearity");
  c.info << "semicircle " << linearity(arc);
}

// 2. street profile limits
void profile_suite(Check& c) {
  const double setback = 6.0;
  const std::vector<Footprint> walls{house(0, -10, setback, 60, 10), house(1, -10, -setback - 10, 60, 10)};
  const FootprintIndex idx(walls);
  const auto p = street_profile(Linestring{{0, 0}, {40, 0}}, idx);
  c.near(p.openness, 0.0, 0.0, "walled openness");
  c.near(p.width, 2 * setback, 1e-9, "walled width");
  const std::vector<Footprint> none;
  const FootprintIndex empty(none);
  const auto o = street_profile(Linestring{{0, 0}, {40, 0}}, empty);
  c.near(o.openness, 1.0, 0.0, "empty openness");
  c.near(o.width, 100.0, 0.0, "empty width");
  c.info << "width " << p.width << " / " << o.width;
}

// 3. constrained Ward against the exhaustive oracle
void ward_oracle(Check& c) {
  std::mt19937_64 rng(2024);
  std::size_t merges = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto w = oracle::random_ward_instance(rng, 12);
    const auto want = oracle::exhaustive_ward(w.x, w.g);
    const auto got = constrained_ward(w.x, w.g);
    c.expect(oracle::same_dendrogram(got, want, 1e-9), "instance " + std::to_string(rep) + " differs");
    merges += want.merges.size();
  }
  c.info << "50 instances, " << merges << " merges";
}

// 4. leaf extraction traces
void leaf_traces(Check& c) {
  Dendrogram d;
  d.leaves = 6;
  d.merges = {{0, 1, 1.0, 2}, {2, 6, 2.0, 3}, {3, 4, 1.5, 2}, {5, 8, 2.5, 3}, {7, 9, 5.0, 6}};
  c.expect(leaf_extract(d, 3) == std::vector<int>{0, 0, 0, 1, 1, 1}, "min_size 3: two triples");
  c.expect(leaf_extract(d, 4) == std::vector<int>(6, 0), "min_size 4: one cluster at root");
  c.expect(leaf_extract(d, 7) == std::vector<int>(6, kNoise), "min_size 7: all noise");

  Dendrogram s;
  s.leaves = 8;
  s.merges = {{0, 1, 1, 2}, {2, 8, 1, 3}, {3, 9, 2, 4}, {4, 5, 1, 2}, {6, 11, 1, 3}, {10, 12, 3, 7}, {7, 13, 4, 8}};
  c.expect(leaf_extract(s, 3) == std::vector<int>{0, 0, 0, 0, 1, 1, 1, kNoise}, "straggler trace");

  // ten tight points on a path, min_size 75
  Matrix x(10, 1);
  ContiguityGraph g(10);
  for (std::size_t i = 0; i + 1 < 10; ++i) g.add_edge(i, i + 1);
  c.expect(leaf_extract(constrained_ward(x, g), 75) == std::vector<int>(10, kNoise), "n < min_size: all noise");
  c.info << "4 traces";
}

Morphology characterise_scene(const fixtures::Scene& s) {
  return characterise(s.footprints, s.segments, PipelineConfig{});
}

// 5. size and connectivity of every morphotope on fixture scenes
void sa3_invariants(Check& c) {
  std::size_t runs = 0, clusters = 0;
  auto audit = [&](const fixtures::SceneSpec& spec, std::initializer_list<std::size_t> sizes) {
    const auto m = characterise_scene(fixtures::generate(spec));
    for (auto min_size : sizes) {
      for (unsigned workers : {1u, 4u}) {
        const auto r = sa3(m.table, m.tess.contiguity, min_size, workers);
        try {
          check_morphotopes(r.labels, m.tess.contiguity, min_size);
        } catch (const Error& e) {
          c.expect(false, e.what());
        }
        ++runs;
        clusters += r.clusters;
      }
    }
  };
  for (std::uint64_t seed : {1, 2, 3}) {
    audit(fixtures::two_pattern_spec(seed), {10, 50, 75});
    audit(fixtures::four_pattern_spec(seed), {10, 20, 75});
  }
  audit(fixtures::two_pattern_spec(4, 25), {50, 75});
  c.info << runs << " runs, " << clusters << " morphotopes checked";
}

// 6. SA3 follows the edge between two patterns
void boundary_fidelity(Check& c) {
  double worst = 1.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = fixtures::generate(fixtures::two_pattern_spec(seed));
    const auto m = characterise_scene(s);
    const auto r = sa3(m.table, m.tess.contiguity, 50);
    worst = std::min(worst, fixtures::adjusted_rand_index(r.labels, s.labels));
  }
  c.expect(worst >= 0.95, "ARI below 0.95 on 2x96");

  // ~400 buildings: morphotopes are smaller than a pattern but must not cross it
  const auto big = fixtures::generate(fixtures::two_pattern_spec(1, 25));
  const auto m = characterise_scene(big);
  const auto r = sa3(m.table, m.tess.contiguity, 50);
  std::map<int, std::set<int>> patterns;
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    if (r.labels[i] != kNoise) patterns[r.labels[i]].insert(big.labels[i]);
  }
  std::size_t pure = 0;
  for (const auto& [label, p] : patterns) pure += p.size() == 1;
  c.expect(!patterns.empty() && pure == patterns.size(), "a morphotope crosses the pattern edge");
  c.info << "ARI " << worst << " (2x96); " << big.footprints.size() << " bldgs: " << patterns.size()
         << " morphotopes, purity " << (patterns.empty() ? 0.0 : double(pure) / double(patterns.size())) << ", ARI "
         << fixtures::adjusted_rand_index(r.labels, big.labels);
}

// 7. tessellation is a partition that converges with the densification step
void tessellation_properties(Check& c) {
  const auto s = fixtures::generate(fixtures::four_pattern_spec(1));
  const auto segs = node_street_segments(s.segments);
  const auto graph = build_street_graph(segs);
  TessellationConfig coarse, fine;
  fine.segment_step = coarse.segment_step / 2;
  const auto a = enclosed_tessellation(s.footprints, segs, graph, coarse);
  const auto b = enclosed_tessellation(s.footprints, segs, graph, fine);
  c.expect(a.cells.size() == s.footprints.size(), "one cell per building");

  namespace bgi = boost::geometry::index;
  std::vector<std::pair<Box, std::size_t>> boxes;
  for (std::size_t i = 0; i < a.cells.size(); ++i) boxes.emplace_back(envelope(a.cells[i].shape), i);
  const bgi::rtree<std::pair<Box, std::size_t>, bgi::quadratic<16>> tree(boxes);
  double worst_overlap = 0, worst_change = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    c.expect(bg::covered_by(representative_point(s.footprints[i].shape), a.cells[i].shape),
             "footprint " + std::to_string(i) + " outside its cell");
    std::vector<std::pair<Box, std::size_t>> hits;
    tree.query(bgi::intersects(boxes[i].first), std::back_inserter(hits));
    for (const auto& [box, j] : hits) {
      if (j <= i) continue;
      worst_overlap = std::max(worst_overlap, overlap_area(a.cells[i].shape, a.cells[j].shape));
    }
    const double aa = bg::area(a.cells[i].shape), ab = bg::area(b.cells[i].shape);
    worst_change = std::max(worst_change, std::abs(aa - ab) / ab);
  }
  c.expect(worst_overlap < 1e-6, "cells overlap");
  c.expect(worst_change < 0.005, "area changes by 0.5% or more when halving the step");
  c.info << a.cells.size() << " cells, max overlap " << worst_overlap << " m2, max area change "
         << 100 * worst_change << "%";
}

// 60 profiles in three blobs; blob b is shifted along every third feature
std::vector<MorphotopeProfile> blob_profiles(std::mt19937_64& rng, std::vector<int>& truth) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t n_cols = character_names().size();
  std::vector<MorphotopeProfile> out;
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < 20; ++i) {
      MorphotopeProfile p;
      p.id = static_cast<int>(out.size());
      p.medians.resize(n_cols);
      for (std::size_t k = 0; k < n_cols; ++k) p.medians[k] = noise(rng) + (static_cast<int>(k % 3) == b ? 8.0 : 0.0);
      p.extras.area_top10 = noise(rng);
      p.member_count = 80;
      out.push_back(p);
      truth.push_back(b);
    }
  }
  return out;
}

// 8. nested cuts and blob recovery
void taxonomy_nesting(Check& c) {
  std::mt19937_64 rng(8);
  std::vector<int> truth;
  const auto ps = blob_profiles(rng, truth);
  std::vector<int> ids(ps.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto tree = build_taxonomy(standardize(ps), ids);
  std::vector<int> coarse;
  for (std::size_t k : {2, 4, 8, 16}) {
    const auto cut = flat_cut(tree, k);
    c.expect(std::set<int>(cut.labels.begin(), cut.labels.end()).size() == k, "K=" + std::to_string(k) + " size");
    if (!coarse.empty()) {
      std::map<int, int> parent;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto [it, fresh] = parent.emplace(cut.labels[i], coarse[i]);
        c.expect(fresh || it->second == coarse[i], "K=" + std::to_string(k) + " does not refine the coarser cut");
      }
    }
    coarse = cut.labels;
  }
  const auto three = flat_cut(tree, 3);
  std::map<int, std::set<int>> members;
  for (std::size_t i = 0; i < ids.size(); ++i) members[three.labels[i]].insert(truth[i]);
  std::size_t pure = 0;
  for (const auto& [label, t] : members) pure += t.size() == 1;
  c.expect(members.size() == 3 && pure == 3, "K=3 does not recover the blobs");
  c.info << "K=3 purity " << double(pure) / double(members.size()) << ", joins " << tree.joins;
}

// 9. noise pseudo-morphotopes follow their nearest branch, or stay unlabelled
void noise_assignment(Check& c) {
  std::mt19937_64 rng(9);
  std::vector<int> truth;
  auto ps = blob_profiles(rng, truth);
  ps.resize(40);  // two blobs
  std::vector<int> ids(ps.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto st = fit_standardizer(ps);
  const auto z = st.apply(ps);
  const auto tree = build_taxonomy(z, ids);
  const auto cut = flat_cut(tree, 2);

  // a pseudo-morphotope sitting on the first blob's centre
  MorphotopeProfile q = ps[0];
  q.id = 1000;
  for (std::size_t k = 0; k < q.medians.size(); ++k) q.medians[k] = k % 3 == 0 ? 8.0 : 0.0;
  q.extras.area_top10 = 0;
  const int want = cut.labels[0];
  const auto kept = assign_noise({q}, st, z, cut.labels, 5);
  c.expect(kept == std::vector<int>{want}, "pseudo-morphotope not given its neighbours' branch");
  const auto discarded = assign_noise({q}, st, z, cut.labels, 5, true);
  c.expect(discarded == std::vector<int>{kNoise}, "discard mode labelled the pseudo-morphotope");
  c.info << "assigned branch " << (kept.empty() ? -99 : kept[0]) << ", discard -> "
         << (discarded.empty() ? -99 : discarded[0]);
}

// 10. cross-tabulation integrity
void cross_tab(Check& c) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 1000);
  std::uniform_int_distribution<int> lab(0, 5);
  std::vector<Footprint> blds;
  std::vector<int> branch;
  for (Id i = 0; i < 1000; ++i) {
    blds.push_back(house(i, u(rng), u(rng), 10, 8));
    branch.push_back(lab(rng));
  }
  std::vector<io::LabeledPolygon> ext;
  for (int z = 0; z < 12; ++z) {
    const double x = u(rng), y = u(rng);
    ext.push_back({to_multi(rect(x, y, x + 300, y + 250)), "class" + std::to_string(z % 4)});
  }
  const auto m = cross_tabulate(blds, branch, ext, 4);
  std::size_t total = 0;
  double worst = 0;
  c.expect(m.values.size() == m.branches.size() && m.counts.size() == m.branches.size(), "row count");
  for (std::size_t r = 0; r < m.values.size(); ++r) {
    c.expect(m.values[r].size() == m.classes.size(), "row width");
    worst = std::max(worst, std::abs(std::accumulate(m.values[r].begin(), m.values[r].end(), 0.0) - 1.0));
    for (auto n : m.counts[r]) total += n;
  }
  c.expect(worst <= 1e-9, "row does not sum to 1");
  c.expect(total == blds.size(), "building count not conserved");
  const auto csv = confusion_to_csv(m);
  const auto rows = io::parse_csv(csv);
  c.expect(rows.size() == m.branches.size() + 1 && rows[0].size() == m.classes.size() + 1 && rows[0][0] == "branch",
           "CSV is not branches x classes");
  c.info << m.branches.size() << " branches x " << m.classes.size() << " classes, max row error " << worst;
}

// 11. full pipeline reproduces byte-identical artifacts
void determinism(Check& c) {
  const auto root = test::scratch_dir("acceptance_determinism");
  const auto scene = fixtures::generate(fixtures::four_pattern_spec(1));
  io::write_file_atomic(root / "footprints.geojson", io::footprints_to_geojson(scene.footprints));
  io::write_file_atomic(root / "streets.geojson", io::segments_to_geojson(scene.segments));
  auto hashes = [&](const std::string& name, unsigned workers) {
    PipelineConfig cfg;
    cfg.footprints = root / "footprints.geojson";
    cfg.streets = root / "streets.geojson";
    cfg.out = root / name;
    cfg.min_size = 10;
    cfg.k = 4;
    cfg.workers = workers;
    run_stage("all", cfg);
    std::map<std::string, std::string> h;
    for (const auto& e : fs::directory_iterator(cfg.out)) h[e.path().filename().string()] = sha256_file(e.path());
    return h;
  };
  const auto first = hashes("run1", 1);
  c.expect(hashes("run2", 1) == first, "second run differs");
  c.expect(hashes("run3", 4) == first, "4 workers differ from 1");
  c.expect(first.size() >= 17, "artifact set incomplete");
  c.info << first.size() << " artifacts identical over 3 runs";
  fs::remove_all(root);
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "shape characters", 1, shape_suite},
      {2, "street profile", 1, profile_suite},
      {3, "constrained Ward oracle", 10, ward_oracle},
      {4, "leaf extraction", 1, leaf_traces},
      {5, "SA3 invariants", 0, sa3_invariants},
      {6, "boundary fidelity", 60, boundary_fidelity},
      {7, "tessellation partition", 30, tessellation_properties},
      {8, "taxonomy nestedness", 5, taxonomy_nesting},
      {9, "noise assignment", 1, noise_assignment},
      {10, "cross-tab integrity", 1, cross_tab},
      {11, "determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.budget_s > 0 && secs >= cr.budget_s) {
      c.failures.push_back("runtime over " + std::to_string(static_cast<int>(cr.budget_s)) + " s");
    }
    const bool ok = c.failures.empty();
    failed += !ok;
    std::printf("%s %2d %-24s %8.3fs  %s\n", ok ? "PASS" : "FAIL", cr.number, cr.title.c_str(), secs,
                ok ? c.info.str().c_str() : (c.failures.front() + " | " + c.info.str()).c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
