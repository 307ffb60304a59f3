#include "himoc/tessellation.hpp"

#include "himoc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include <boost/geometry/index/rtree.hpp>
#include <boost/polygon/voronoi.hpp>

namespace himoc {

namespace bgi = boost::geometry::index;
namespace bp = boost::polygon;

namespace {

using BoxEntry = std::pair<Box, std::size_t>;
using Tree = bgi::rtree<BoxEntry, bgi::rstar<16>>;

template <typename Geom>
Tree index_boxes(std::span<const Geom> geoms, double margin = 0.0) {
  std::vector<BoxEntry> entries;
  entries.reserve(geoms.size());
  for (std::size_t i = 0; i < geoms.size(); ++i) {
    Box b;
    bg::envelope(geoms[i], b);
    entries.emplace_back(expand(b, margin), i);
  }
  return Tree(entries.begin(), entries.end());
}

MultiPolygon union_all(std::vector<MultiPolygon> parts) {
  if (parts.empty()) return {};
  while (parts.size() > 1) {
    std::vector<MultiPolygon> next;
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
      MultiPolygon u;
      bg::union_(parts[i], parts[i + 1], u);
      next.push_back(std::move(u));
    }
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

MultiPolygon intersect(const MultiPolygon& a, const MultiPolygon& b) {
  MultiPolygon out;
  bg::intersection(a, b, out);
  return out;
}

// Round join whose arc step count tolerates rounding noise in the turn angle;
// Boost's own join takes the ceiling, so a rotated 90 degree corner may gain
// a point and the buffer would depend on orientation.
struct StableRoundJoin {
  std::size_t points_per_circle = 72;

  template <typename P, typename D, typename Out>
  bool apply(const P& /*ip*/, const P& vertex, const P& perp1, const P& perp2, const D& distance,
             Out& out) const {
    if (bg::equals(perp1, perp2)) return false;
    const double two_pi = 2.0 * std::numbers::pi;
    const double a1 = std::atan2(perp1.y() - vertex.y(), perp1.x() - vertex.x());
    double a2 = std::atan2(perp2.y() - vertex.y(), perp2.x() - vertex.x());
    while (a2 > a1) a2 -= two_pi;
    const double turn = a1 - a2;
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(static_cast<double>(points_per_circle) * turn / two_pi - 1e-6)));
    const double step = turn / static_cast<double>(n);
    const double r = std::abs(distance);
    out.push_back(perp1);
    double a = a1 - step;
    for (std::size_t i = 0; i + 1 < n; ++i, a -= step) {
      out.push_back(P{vertex.x() + r * std::cos(a), vertex.y() + r * std::sin(a)});
    }
    out.push_back(perp2);
    return true;
  }

  template <typename T>
  static T max_distance(const T& distance) {
    return distance;
  }
};

MultiPolygon buffer(const Polygon& p, double r) {
  namespace bs = bg::strategy::buffer;
  MultiPolygon out;
  bg::buffer(to_multi(p), out, bs::distance_symmetric<double>(r), bs::side_straight(), StableRoundJoin{},
             bs::end_round(72), bs::point_circle(72));
  return out;
}

Box box_of(const Polygon& p) {
  Box b;
  bg::envelope(p, b);
  return b;
}

}  // namespace

std::vector<Segment> node_street_segments(std::span<const Segment> segs) {
  std::vector<Linestring> lines;
  lines.reserve(segs.size());
  for (const auto& s : segs) lines.push_back(s.points);
  auto parts = split_polylines(lines);
  std::vector<Segment> out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (auto& part : parts[i]) {
      out.push_back({static_cast<Id>(out.size()), std::move(part), segs[i].kind, segs[i].tunnel});
    }
  }
  return out;
}

StreetGraph build_street_graph(std::span<const Segment> segs, double snap) {
  StreetGraph g;
  SnapIndex index(snap);
  for (const auto& s : segs) {
    const int a = index.insert(s.points.front());
    const int b = index.insert(s.points.back());
    g.ends.emplace_back(static_cast<Id>(a), static_cast<Id>(b));
    g.lengths.push_back(bg::length(s.points));
  }
  const auto& pts = index.points();
  g.nodes.resize(pts.size());
  g.adj.resize(pts.size());
  for (std::size_t v = 0; v < pts.size(); ++v) {
    g.nodes[v].id = static_cast<Id>(v);
    g.nodes[v].position = pts[v];
  }
  for (std::size_t s = 0; s < segs.size(); ++s) {
    auto [a, b] = g.ends[s];
    g.nodes[a].incident.push_back(static_cast<Id>(s));
    g.nodes[b].incident.push_back(static_cast<Id>(s));
    g.adj[a].emplace_back(static_cast<Id>(s), b);
    g.adj[b].emplace_back(static_cast<Id>(s), a);
  }
  return g;
}

std::vector<Enclosure> build_enclosures(std::span<const Segment> segs, const Box& extent, double pad) {
  std::vector<LineSeg> pieces;
  for (const auto& s : segs) {
    for (std::size_t k = 0; k + 1 < s.points.size(); ++k) pieces.emplace_back(s.points[k], s.points[k + 1]);
  }
  Box frame = extent;
  for (const auto& p : pieces) {
    bg::expand(frame, p.first);
    bg::expand(frame, p.second);
  }
  frame = expand(frame, pad);

  std::vector<MultiPolygon> face_shapes;
  for (auto& f : bounded_faces(node_segments(pieces))) face_shapes.push_back(to_multi(f));
  std::vector<Enclosure> out;
  std::vector<std::size_t> order(face_shapes.size());
  std::vector<Point> keys(face_shapes.size());
  for (std::size_t i = 0; i < face_shapes.size(); ++i) {
    order[i] = i;
    keys[i] = representative_point(face_shapes[i]);
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (keys[a].y() != keys[b].y()) return keys[a].y() < keys[b].y();
    return keys[a].x() < keys[b].x();
  });
  for (auto i : order) out.push_back({static_cast<Id>(out.size()), face_shapes[i], false});

  Polygon frame_poly;
  bg::convert(frame, frame_poly);
  MultiPolygon rest = to_multi(frame_poly);
  if (!face_shapes.empty()) {
    MultiPolygon cut;
    bg::difference(rest, union_all(face_shapes), cut);
    rest = std::move(cut);
  }
  for (auto& part : rest) {
    if (bg::area(part) <= 1e-9) continue;
    out.push_back({static_cast<Id>(out.size()), to_multi(part), true});
  }
  return out;
}

EnclosureAssignment assign_enclosures(std::span<const Footprint> blds, std::span<const Enclosure> encl) {
  std::vector<MultiPolygon> shapes;
  for (const auto& e : encl) shapes.push_back(e.shape);
  auto tree = index_boxes<MultiPolygon>(shapes);
  EnclosureAssignment out;
  out.enclosure_of.resize(blds.size(), 0);
  for (std::size_t i = 0; i < blds.size(); ++i) {
    std::vector<BoxEntry> hits;
    tree.query(bgi::intersects(box_of(blds[i].shape)), std::back_inserter(hits));
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    double best = -1.0;
    std::size_t pick = 0;
    for (const auto& h : hits) {
      MultiPolygon inter;
      bg::intersection(blds[i].shape, shapes[h.second], inter);
      const double a = bg::area(inter);
      if (a > best) {
        best = a;
        pick = h.second;
      }
    }
    if (best <= 0.0) {
      const Point rp = representative_point(blds[i].shape);
      for (std::size_t e = 0; e < shapes.size(); ++e) {
        if (bg::covered_by(rp, shapes[e])) {
          pick = e;
          break;
        }
      }
    }
    out.enclosure_of[i] = static_cast<Id>(pick);
    if (encl[pick].outer) ++out.outside;
  }
  return out;
}

namespace {

struct EnclosureRegions {
  std::vector<std::size_t> members;
  std::vector<MultiPolygon> regions;  // parallel to members
  std::vector<std::pair<std::size_t, std::size_t>> neighbor_pairs;
};

EnclosureRegions regions_in_enclosure(std::span<const Footprint> blds, const MultiPolygon& encl,
                                      std::vector<std::size_t> members, double step, double shrink) {
  EnclosureRegions out;
  out.members = std::move(members);
  const std::size_t m = out.members.size();
  out.regions.resize(m);
  if (m == 1) {
    out.regions[0] = encl;
    return out;
  }
  Box box = envelope(encl);
  for (auto b : out.members) bg::expand(box, box_of(blds[b].shape));
  const double w = box.max_corner().x() - box.min_corner().x();
  const double h = box.max_corner().y() - box.min_corner().y();
  const double diag = std::hypot(w, h);
  const double margin = 2.0 * diag + 10.0;
  // power-of-two quantum on an aligned origin keeps mirrored inputs mirrored
  const double extent = std::max(w, h) + 2.0 * margin;
  const double quantum = std::exp2(std::ceil(std::log2(extent / double(1 << 30))));
  const Point origin{std::floor((box.min_corner().x() - margin) / quantum) * quantum,
                     std::floor((box.min_corner().y() - margin) / quantum) * quantum};

  std::map<std::pair<int, int>, int> site_label;
  std::vector<bp::point_data<int>> sites;
  std::vector<int> labels;
  auto add_site = [&](const Point& p, int label) {
    const int x = static_cast<int>(std::llround((p.x() - origin.x()) / quantum));
    const int y = static_cast<int>(std::llround((p.y() - origin.y()) / quantum));
    if (site_label.emplace(std::make_pair(x, y), label).second) {
      sites.emplace_back(x, y);
      labels.push_back(label);
    }
  };
  for (std::size_t k = 0; k < m; ++k) {
    const auto& raw = blds[out.members[k]].shape;
    // sites sit on the inset boundary so touching neighbours never share one
    MultiPolygon seeds;
    if (shrink > 0.0) {
      namespace bs = bg::strategy::buffer;
      bg::buffer(to_multi(raw), seeds, bs::distance_symmetric<double>(-shrink), bs::side_straight(),
                 bs::join_miter(), bs::end_flat(), bs::point_square());
    }
    if (seeds.empty()) seeds = to_multi(raw);
    for (const auto& poly : seeds) {
      for (const auto& p : densify_ring(poly.outer(), step)) add_site(p, static_cast<int>(k));
      for (const auto& hole : poly.inners()) {
        for (const auto& p : densify_ring(hole, step)) add_site(p, static_cast<int>(k));
      }
    }
  }
  {
    const Point lo{box.min_corner().x() - margin, box.min_corner().y() - margin};
    const Point hi{box.max_corner().x() + margin, box.max_corner().y() + margin};
    Ring frame{lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}, lo};
    for (const auto& p : densify_ring(frame, margin / 2.0)) add_site(p, -1);
  }

  bp::voronoi_diagram<double> vd;
  bp::construct_voronoi(sites.begin(), sites.end(), &vd);
  using Edge = bp::voronoi_diagram<double>::edge_type;
  auto label_of = [&](const Edge* e) { return labels[e->cell()->source_index()]; };
  auto world = [&](const bp::voronoi_vertex<double>* v) {
    return Point{origin.x() + v->x() * quantum, origin.y() + v->y() * quantum};
  };

  std::vector<std::vector<std::vector<Point>>> rings(m);
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  const Edge* base = &vd.edges().front();
  std::vector<char> visited(vd.edges().size(), 0);
  for (const auto& e : vd.edges()) {
    const int lc = label_of(&e);
    const int lt = label_of(e.twin());
    if (lc < 0 || lc == lt) continue;
    if (lt >= 0 && lc < lt && e.vertex0() && e.vertex1()) {
      const auto key = std::make_pair(std::size_t(lc), std::size_t(lt));
      if (!pairs.contains(key) && bg::intersects(LineSeg(world(e.vertex0()), world(e.vertex1())), encl)) {
        pairs.insert(key);
      }
    }
    if (visited[&e - base]) continue;
    std::vector<Point> ring;
    const Edge* cur = &e;
    bool ok = true;
    do {
      visited[cur - base] = 1;
      if (!cur->vertex0()) {
        ok = false;
        break;
      }
      ring.push_back(world(cur->vertex0()));
      const Edge* f = cur->next();
      while (label_of(f->twin()) == lc) f = f->twin()->next();
      cur = f;
    } while (cur != &e);
    if (ok && ring.size() >= 3) rings[lc].push_back(std::move(ring));
  }
  for (std::size_t k = 0; k < m; ++k) {
    MultiPolygon region;
    for (auto& p : assemble_rings(rings[k])) region.push_back(std::move(p));
    out.regions[k] = intersect(region, encl);
  }
  for (auto [a, b] : pairs) out.neighbor_pairs.emplace_back(out.members[a], out.members[b]);
  return out;
}

}  // namespace

VoronoiRegions voronoi_regions(std::span<const Footprint> blds, std::span<const Enclosure> encl,
                               std::span<const Id> enclosure_of, const TessellationConfig& cfg) {
  std::vector<std::vector<std::size_t>> members(encl.size());
  for (std::size_t i = 0; i < blds.size(); ++i) members[enclosure_of[i]].push_back(i);
  std::vector<EnclosureRegions> per(encl.size());
  parallel_for(encl.size(), cfg.workers, [&](std::size_t e) {
    if (members[e].empty()) return;
    per[e] = regions_in_enclosure(blds, encl[e].shape, members[e], cfg.segment_step, cfg.shrink);
  });
  VoronoiRegions out;
  out.regions.resize(blds.size());
  out.neighbors = ContiguityGraph(blds.size());
  for (auto& r : per) {
    for (std::size_t k = 0; k < r.members.size(); ++k) out.regions[r.members[k]] = std::move(r.regions[k]);
    for (auto [a, b] : r.neighbor_pairs) out.neighbors.add_edge(a, b);
  }
  return out;
}

std::vector<double> compute_bandwidth(std::span<const Footprint> blds, const ContiguityGraph& neighbors,
                                      const TessellationConfig& cfg) {
  std::vector<double> out(blds.size(), cfg.default_bandwidth);
  parallel_for(blds.size(), cfg.workers, [&](std::size_t i) {
    if (neighbors.degree(i) == 0) return;
    double far = 0.0;
    for (auto j : neighbors.neighbors(i)) far = std::max(far, bg::distance(blds[i].shape, blds[j].shape));
    out[i] = std::max(cfg.min_bandwidth, cfg.bandwidth_factor * far);
  });
  return out;
}

TessellationResult tessellate(std::span<const Footprint> blds, std::span<const Enclosure> encl,
                              std::span<const Id> enclosure_of, const VoronoiRegions& vr,
                              std::span<const double> bandwidth, const TessellationConfig& cfg) {
  std::vector<Polygon> shapes;
  for (const auto& b : blds) shapes.push_back(b.shape);
  auto tree = index_boxes<Polygon>(shapes);
  TessellationResult out;
  out.cells.resize(blds.size());
  std::vector<char> fallback(blds.size(), 0);
  parallel_for(blds.size(), cfg.workers, [&](std::size_t i) {
    const MultiPolygon& e = encl[enclosure_of[i]].shape;
    const MultiPolygon buf = buffer(blds[i].shape, bandwidth[i]);
    MultiPolygon cell = intersect(vr.regions[i], buf);
    MultiPolygon own = intersect(to_multi(blds[i].shape), e);
    {
      MultiPolygon u;
      bg::union_(cell, own, u);
      cell = std::move(u);
    }
    std::vector<BoxEntry> hits;
    tree.query(bgi::intersects(envelope(cell.empty() ? own : cell)), std::back_inserter(hits));
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    for (const auto& h : hits) {
      if (h.second == i || !bg::intersects(cell, shapes[h.second])) continue;
      MultiPolygon d;
      bg::difference(cell, shapes[h.second], d);
      cell = std::move(d);
    }
    if (cell.empty() || bg::area(cell) <= 0.0) {
      cell = intersect(buf, e);
      fallback[i] = 1;
    }
    TessCell& c = out.cells[i];
    c.id = blds[i].id;
    c.shape = std::move(cell);
    c.enclosure_id = enclosure_of[i];
  });
  out.empty_fallbacks = static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), 1));
  return out;
}

ContiguityGraph cell_contiguity(std::span<const TessCell> cells, double tol, unsigned workers) {
  std::vector<MultiPolygon> shapes;
  for (const auto& c : cells) shapes.push_back(c.shape);
  auto tree = index_boxes<MultiPolygon>(shapes, tol);
  std::vector<std::vector<std::size_t>> nbrs(cells.size());
  parallel_for(cells.size(), workers, [&](std::size_t i) {
    if (shapes[i].empty()) return;
    std::vector<BoxEntry> hits;
    tree.query(bgi::intersects(expand(envelope(shapes[i]), tol)), std::back_inserter(hits));
    for (const auto& h : hits) {
      const std::size_t j = h.second;
      if (j <= i || shapes[j].empty()) continue;
      if (bg::distance(shapes[i], shapes[j]) <= tol) nbrs[i].push_back(j);
    }
  });
  ContiguityGraph g(cells.size());
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    for (auto j : nbrs[i]) g.add_edge(i, j);
  }
  return g;
}

std::vector<std::int64_t> nearest_segments(std::span<const Footprint> blds, std::span<const Segment> segs) {
  std::vector<std::int64_t> out(blds.size(), -1);
  if (segs.empty()) return out;
  std::vector<Linestring> lines;
  for (const auto& s : segs) lines.push_back(s.points);
  auto tree = index_boxes<Linestring>(lines);
  for (std::size_t i = 0; i < blds.size(); ++i) {
    Point c;
    bg::centroid(blds[i].shape, c);
    std::vector<BoxEntry> first;
    tree.query(bgi::nearest(c, 1), std::back_inserter(first));
    const double d0 = bg::distance(c, lines[first.front().second]);
    std::vector<BoxEntry> hits;
    const Box probe{{c.x() - d0, c.y() - d0}, {c.x() + d0, c.y() + d0}};
    tree.query(bgi::intersects(probe), std::back_inserter(hits));
    double best = std::numeric_limits<double>::infinity();
    std::size_t pick = first.front().second;
    for (const auto& h : hits) {
      const double d = bg::distance(c, lines[h.second]);
      if (d < best || (d == best && h.second < pick)) {
        best = d;
        pick = h.second;
      }
    }
    out[i] = static_cast<std::int64_t>(pick);
  }
  return out;
}

ContiguityGraph cell_graphs(std::vector<TessCell>& cells, std::span<const Footprint> blds,
                            std::span<const Segment> segs, const StreetGraph& graph,
                            const TessellationConfig& cfg) {
  const auto seg_of = nearest_segments(blds, segs);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].segment_id = seg_of[i];
    cells[i].node_id = -1;
    if (seg_of[i] < 0) continue;
    Point c;
    bg::centroid(blds[i].shape, c);
    auto [a, b] = graph.ends[static_cast<std::size_t>(seg_of[i])];
    const double da = distance(c, graph.nodes[a].position);
    const double db = distance(c, graph.nodes[b].position);
    cells[i].node_id = (da < db || (da == db && a < b)) ? a : b;
  }
  return cell_contiguity(cells, cfg.contiguity_tol, cfg.workers);
}

EnclosedTessellation enclosed_tessellation(std::span<const Footprint> blds, std::span<const Segment> segs,
                                           const StreetGraph& graph, const TessellationConfig& cfg) {
  EnclosedTessellation t;
  Box extent;
  bg::assign_inverse(extent);
  for (const auto& b : blds) bg::expand(extent, box_of(b.shape));
  t.enclosures = build_enclosures(segs, extent, cfg.default_bandwidth);
  t.assignment = assign_enclosures(blds, t.enclosures);
  VoronoiRegions vr = voronoi_regions(blds, t.enclosures, t.assignment.enclosure_of, cfg);
  t.first_pass_neighbors = vr.neighbors;
  t.bandwidth = compute_bandwidth(blds, vr.neighbors, cfg);
  auto res = tessellate(blds, t.enclosures, t.assignment.enclosure_of, vr, t.bandwidth, cfg);
  t.cells = std::move(res.cells);
  t.empty_fallbacks = res.empty_fallbacks;
  t.contiguity = cell_graphs(t.cells, blds, segs, graph, cfg);
  return t;
}

}  // namespace himoc
