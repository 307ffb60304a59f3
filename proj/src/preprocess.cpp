#include "himoc/preprocess.hpp"

#include <algorithm>
#include <map>

#include <boost/geometry/index/rtree.hpp>

namespace himoc {

namespace bgi = boost::geometry::index;

namespace {

using BoxEntry = std::pair<Box, std::size_t>;

bgi::rtree<BoxEntry, bgi::rstar<16>> index_polygons(std::span<const Polygon> polys, double margin) {
  std::vector<BoxEntry> entries;
  entries.reserve(polys.size());
  for (std::size_t i = 0; i < polys.size(); ++i) {
    Box b;
    bg::envelope(polys[i], b);
    entries.emplace_back(expand(b, margin), i);
  }
  return {entries.begin(), entries.end()};
}

Polygon largest_part(const MultiPolygon& mp, const Polygon& fallback) {
  if (mp.empty()) return fallback;
  auto it = std::max_element(mp.begin(), mp.end(),
                             [](const auto& a, const auto& b) { return bg::area(a) < bg::area(b); });
  return *it;
}

Polygon simplify(const Polygon& p, double tol) {
  if (tol <= 0.0) return p;
  Polygon out;
  bg::simplify(p, out, tol);
  bg::correct(out);
  if (out.outer().size() < 4 || !bg::is_valid(out) || bg::area(out) <= 0.0) return p;
  return out;
}

std::size_t vertex_count(const Polygon& p) {
  std::size_t n = p.outer().size();
  for (const auto& h : p.inners()) n += h.size();
  return n;
}

// Douglas-Peucker is not idempotent; repeat until the vertex count settles.
bool simplify_fixpoint(Polygon& p, double tol) {
  bool changed = false;
  for (int k = 0; k < 16; ++k) {
    Polygon q = simplify(p, tol);
    if (vertex_count(q) == vertex_count(p)) break;
    p = std::move(q);
    changed = true;
  }
  return changed;
}

// Returns true when any polygon changed.
bool merge_fixpoint(std::vector<Polygon>& polys, std::vector<char>& alive, const PreprocessConfig& cfg,
                    std::size_t& merged) {
  bool any = false;
  bool changed = true;
  while (changed) {
    changed = false;
    auto tree = index_polygons(polys, 0.0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < polys.size(); ++i) {
      if (!alive[i]) continue;
      Box b;
      bg::envelope(polys[i], b);
      std::vector<BoxEntry> hits;
      tree.query(bgi::intersects(b), std::back_inserter(hits));
      for (const auto& h : hits) {
        if (h.second > i && alive[h.second]) pairs.emplace_back(i, h.second);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    for (auto [i, j] : pairs) {
      if (!alive[i] || !alive[j]) continue;
      if (!should_merge(polys[i], polys[j], cfg)) continue;
      MultiPolygon u;
      bg::union_(polys[i], polys[j], u);
      polys[i] = largest_part(u, polys[i]);
      alive[j] = 0;
      ++merged;
      changed = true;
      any = true;
    }
  }
  return any;
}

std::size_t fill_gaps(Polygon& p, double gap_area) {
  auto& holes = p.inners();
  const auto before = holes.size();
  holes.erase(std::remove_if(holes.begin(), holes.end(),
                             [&](const Ring& h) { return std::abs(bg::area(h)) < gap_area; }),
              holes.end());
  return before - holes.size();
}

// Moves vertices of higher-index polygons onto nearby vertices of lower ones.
std::size_t snap_vertices(std::vector<Polygon>& polys, const std::vector<char>& alive, double tol) {
  if (tol <= 0.0) return 0;
  auto tree = index_polygons(polys, tol);
  std::size_t snapped = 0;
  for (std::size_t j = 0; j < polys.size(); ++j) {
    if (!alive[j]) continue;
    Box b;
    bg::envelope(polys[j], b);
    std::vector<BoxEntry> hits;
    tree.query(bgi::intersects(expand(b, tol)), std::back_inserter(hits));
    std::sort(hits.begin(), hits.end(), [](const auto& x, const auto& y) { return x.second < y.second; });
    Polygon moved = polys[j];
    bool changed = false;
    auto snap_ring = [&](Ring& r) {
      for (auto& v : r) {
        for (const auto& h : hits) {
          const std::size_t i = h.second;
          if (i >= j || !alive[i]) continue;
          for (const auto& w : polys[i].outer()) {
            const double d = distance(v, w);
            if (d > 0.0 && d <= tol) {
              v = w;
              changed = true;
              break;
            }
          }
        }
      }
    };
    snap_ring(moved.outer());
    for (auto& h : moved.inners()) snap_ring(h);
    if (!changed) continue;
    bg::correct(moved);
    if (!bg::is_valid(moved)) {
      MultiPolygon fixed = make_valid(moved);
      moved = largest_part(fixed, polys[j]);
    }
    if (bg::area(moved) > 0.0) {
      polys[j] = std::move(moved);
      ++snapped;
    }
  }
  return snapped;
}

}  // namespace

const std::set<std::string>& street_kind_whitelist() {
  static const std::set<std::string> kinds = {
      "living_street", "motorway",       "motorway_link", "pedestrian", "primary",
      "primary_link",  "residential",    "secondary",     "secondary_link",
      "tertiary",      "tertiary_link",  "trunk",         "trunk_link", "unclassified"};
  return kinds;
}

bool should_merge(const Polygon& a, const Polygon& b, const PreprocessConfig& cfg) {
  MultiPolygon inter;
  bg::intersection(a, b, inter);
  const double overlap = bg::area(inter);
  if (overlap <= 1e-9) return false;
  const double aa = bg::area(a), ab = bg::area(b);
  return overlap >= cfg.merge_overlap_frac * aa || overlap >= cfg.merge_overlap_frac * ab ||
         std::min(aa, ab) < cfg.merge_small_area;
}

std::pair<std::vector<Footprint>, PreprocessReport> preprocess_buildings(std::vector<Footprint> raw,
                                                                         const PreprocessConfig& cfg) {
  PreprocessReport report;
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<Polygon> polys;
  polys.reserve(raw.size());
  for (auto& f : raw) {
    Polygon p = f.shape;
    simplify_fixpoint(p, cfg.simplify_tol);
    if (bg::area(p) > cfg.max_building_area) {
      ++report.dropped_large;
      continue;
    }
    polys.push_back(std::move(p));
  }
  std::vector<char> alive(polys.size(), 1);
  for (int round = 0; round < 8; ++round) {
    merge_fixpoint(polys, alive, cfg, report.merged_pairs);
    std::size_t touched = 0;
    for (std::size_t i = 0; i < polys.size(); ++i) {
      if (alive[i]) touched += fill_gaps(polys[i], cfg.gap_area);
    }
    touched += snap_vertices(polys, alive, cfg.snap_tol);
    report.snapped_gaps += touched;
    bool resimplified = false;
    for (std::size_t i = 0; i < polys.size(); ++i) {
      if (alive[i] && simplify_fixpoint(polys[i], cfg.simplify_tol)) resimplified = true;
    }
    if (touched == 0 && !resimplified) break;
  }
  std::vector<Footprint> out;
  for (std::size_t i = 0; i < polys.size(); ++i) {
    if (alive[i]) out.push_back({static_cast<Id>(out.size()), std::move(polys[i])});
  }
  return {std::move(out), report};
}

std::pair<std::vector<Segment>, PreprocessReport> filter_segments(std::vector<Segment> raw) {
  PreprocessReport report;
  const auto& kinds = street_kind_whitelist();
  std::vector<Segment> out;
  for (auto& s : raw) {
    if (s.tunnel || !kinds.contains(s.kind)) {
      ++report.filtered_segments;
      continue;
    }
    s.id = static_cast<Id>(out.size());
    out.push_back(std::move(s));
  }
  return {std::move(out), report};
}

ContiguityGraph building_adjacency(std::span<const Footprint> blds, double tol) {
  std::vector<Polygon> polys;
  polys.reserve(blds.size());
  for (const auto& b : blds) polys.push_back(b.shape);
  auto tree = index_polygons(polys, tol / 2.0);
  ContiguityGraph g(blds.size());
  for (std::size_t i = 0; i < polys.size(); ++i) {
    Box b;
    bg::envelope(polys[i], b);
    std::vector<BoxEntry> hits;
    tree.query(bgi::intersects(expand(b, tol / 2.0)), std::back_inserter(hits));
    for (const auto& h : hits) {
      const std::size_t j = h.second;
      if (j <= i) continue;
      if (bg::distance(polys[i], polys[j]) <= tol) g.add_edge(i, j);
    }
  }
  return g;
}

}  // namespace himoc
