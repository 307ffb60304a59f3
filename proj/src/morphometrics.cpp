#include "himoc/morphometrics.hpp"

#include "himoc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <queue>
#include <set>
#include <unordered_map>

#include <boost/geometry/index/rtree.hpp>

namespace himoc {

namespace bgi = boost::geometry::index;

namespace {

using BoxEntry = std::pair<Box, std::size_t>;

struct Stats {
  double sum = 0, sumsq = 0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : kMissing; }
};

double population_std(std::span<const double> v) {
  if (v.empty()) return kMissing;
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double circle_area(double r) { return std::numbers::pi * r * r; }

double eri(double area, double perimeter, const RotatedRect& r) {
  if (r.area() <= 0.0 || perimeter <= 0.0) return kMissing;
  return std::sqrt(area / r.area()) * r.perimeter() / perimeter;
}

double exterior_length(const MultiPolygon& mp) {
  double len = 0;
  for (const auto& p : mp) len += bg::perimeter(p.outer());
  return len;
}

std::size_t hole_count(const MultiPolygon& mp) {
  std::size_t n = 0;
  for (const auto& p : mp) n += p.inners().size();
  return n;
}

// Ray from `o` along unit `dir`: distance to the first footprint boundary, or
// -1 when nothing is hit within `cap`.
double first_hit(const Point& o, double dx, double dy, double cap, const FootprintIndex& index) {
  const Point end{o.x() + dx * cap, o.y() + dy * cap};
  Box box;
  bg::envelope(LineSeg(o, end), box);
  double best = -1.0;
  for (auto b : index.query(box)) {
    const Polygon& poly = index.footprints()[b].shape;
    if (bg::covered_by(o, poly)) return 0.0;
    auto scan = [&](const Ring& r) {
      for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const double ex = r[i + 1].x() - r[i].x(), ey = r[i + 1].y() - r[i].y();
        const double den = dx * ey - dy * ex;
        if (std::abs(den) < 1e-15) continue;
        const double wx = r[i].x() - o.x(), wy = r[i].y() - o.y();
        const double t = (wx * ey - wy * ex) / den;  // along the ray
        const double u = (wx * dy - wy * dx) / den;  // along the edge
        if (t < 0.0 || t > cap || u < 0.0 || u > 1.0) continue;
        if (best < 0.0 || t < best) best = t;
      }
    };
    scan(poly.outer());
    for (const auto& h : poly.inners()) scan(h);
  }
  return best;
}

std::vector<std::size_t> bfs(const std::vector<std::vector<std::size_t>>& adj, std::size_t v, int radius) {
  std::vector<std::size_t> out{v};
  std::unordered_map<std::size_t, int> depth{{v, 0}};
  for (std::size_t head = 0; head < out.size(); ++head) {
    const std::size_t u = out[head];
    const int d = depth[u];
    if (d == radius) continue;
    for (auto w : adj[u]) {
      if (depth.emplace(w, d + 1).second) out.push_back(w);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> simple_node_adjacency(const StreetGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.node_count());
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    for (auto [s, w] : g.adj[v]) {
      if (w != v) adj[v].push_back(w);
    }
    std::sort(adj[v].begin(), adj[v].end());
    adj[v].erase(std::unique(adj[v].begin(), adj[v].end()), adj[v].end());
  }
  return adj;
}

struct ShapeOf {
  double elongation = kMissing, eri = kMissing, cco = kMissing, lal = kMissing;
};

ShapeOf shape_of(const MultiPolygon& mp) {
  ShapeOf s;
  if (mp.empty()) return s;
  const RotatedRect r = min_rotated_rect(mp);
  const Circle c = min_enclosing_circle(mp);
  const double a = bg::area(mp), p = bg::perimeter(mp);
  if (r.length > 0) s.elongation = r.width / r.length;
  s.eri = eri(a, p, r);
  if (c.radius > 0) s.cco = a / circle_area(c.radius);
  s.lal = 2.0 * c.radius;
  return s;
}

}  // namespace

// --- character catalogue ------------------------------------------------------

const std::vector<CharacterSpec>& character_specs() {
  using E = Element;
  using S = Scale;
  static const std::vector<CharacterSpec> specs = {
      {"eq01_area_blg", E::building, S::small, 1},      {"eq02_peri_blg", E::building, S::small, 2},
      {"eq03_crtA_blg", E::building, S::small, 3},      {"eq04_CCo_blg", E::building, S::small, 4},
      {"eq05_Cor_blg", E::building, S::small, 5},       {"eq06_Squ_blg", E::building, S::small, 6},
      {"eq07_ERI_blg", E::building, S::small, 7},       {"eq08_Elo_blg", E::building, S::small, 8},
      {"eq09_LAL_cell", E::cell, S::small, 9},          {"eq10_area_cell", E::cell, S::small, 10},
      {"eq11_CCo_cell", E::cell, S::small, 11},         {"eq12_ERI_cell", E::cell, S::small, 12},
      {"eq13_CAR_cell", E::cell, S::small, 13},         {"eq14_len_edg", E::segment, S::small, 14},
      {"eq15_wid_sp", E::segment, S::small, 15},        {"eq16_Ope_sp", E::segment, S::small, 16},
      {"eq17_wDev_sp", E::segment, S::small, 17},       {"eq18_Lin_edg", E::segment, S::small, 18},
      {"eq19_area_edg", E::segment, S::small, 19},      {"eq20_BpM_edg", E::segment, S::small, 20},
      {"eq21_area_node", E::node, S::small, 21},        {"eq22_SWR_blg", E::building, S::medium, 22},
      {"eq23_NDi_blg", E::building, S::medium, 23},     {"eq24_WNe_cell", E::cell, S::medium, 24},
      {"eq25_areaN_cell", E::cell, S::medium, 25},      {"eq26_areaN_edg", E::segment, S::medium, 26},
      {"eq27_deg_node", E::node, S::medium, 27},        {"eq28_MDi_node", E::node, S::medium, 28},
      {"eq29_RC_node", E::node, S::medium, 29},         {"eq30_areaN_node", E::node, S::medium, 30},
      {"eq31_NCo_blgadj", E::building, S::medium, 31},  {"eq32_peri_blgadj", E::building, S::medium, 32},
      {"eq33_IBD_blg", E::building, S::medium, 33},     {"eq34_BuA_blg", E::building, S::medium, 34},
      {"eq35_WRB_cell", E::cell, S::medium, 35},        {"eq36_Mes_node", E::node, S::large, 36},
      {"eq37_MSL_edg", E::segment, S::large, 37},       {"eq38_CDL_node", E::node, S::large, 38},
      {"eq39_RC_edg", E::segment, S::large, 39},        {"eq40_D_node", E::node, S::large, 40},
      {"eq41_RCnet_node", E::node, S::large, 41},       {"eq42_areanet_node", E::node, S::large, 42},
      {"eq43_pCD_node", E::node, S::large, 43},         {"eq44_p3W_node", E::node, S::large, 44},
      {"eq45_p4W_node", E::node, S::large, 45},         {"eq46_wD_node", E::node, S::large, 46},
      {"eq47_lCC_node", E::node, S::large, 47},         {"eq48_sCl_node", E::node, S::large, 48},
      {"eq49_cnt_cblg", E::building, S::medium, 49},    {"eq50_area_cblg", E::building, S::medium, 50},
      {"eq51_peri_cblg", E::building, S::medium, 51},   {"eq52_Elo_cblg", E::building, S::medium, 52},
      {"eq53_ERI_cblg", E::building, S::medium, 53},    {"eq54_CCo_cblg", E::building, S::medium, 54},
      {"eq55_LAL_cblg", E::building, S::medium, 55},    {"eq56_FR_cblg", E::building, S::medium, 56},
      {"eq57_SCo_cblg", E::building, S::medium, 57},    {"eq58_micBAD_cell", E::cell, S::medium, 58},
      {"eq59_midBAD_node", E::node, S::medium, 59},
  };
  return specs;
}

std::vector<std::string> character_names() {
  std::vector<std::string> out;
  for (const auto& s : character_specs()) out.push_back(s.name);
  return out;
}

// --- spatial index --------------------------------------------------------------

struct FootprintIndex::Tree {
  bgi::rtree<BoxEntry, bgi::rstar<16>> rtree;
};

FootprintIndex::FootprintIndex(std::span<const Footprint> blds) : blds_(blds), tree_(new Tree) {
  std::vector<BoxEntry> entries;
  entries.reserve(blds.size());
  for (std::size_t i = 0; i < blds.size(); ++i) {
    Box b;
    bg::envelope(blds[i].shape, b);
    entries.emplace_back(b, i);
  }
  tree_->rtree = bgi::rtree<BoxEntry, bgi::rstar<16>>(entries.begin(), entries.end());
}

FootprintIndex::~FootprintIndex() { delete tree_; }

std::vector<std::size_t> FootprintIndex::query(const Box& box) const {
  std::vector<BoxEntry> hits;
  tree_->rtree.query(bgi::intersects(box), std::back_inserter(hits));
  std::vector<std::size_t> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.second);
  std::sort(out.begin(), out.end());
  return out;
}

// --- element characters -------------------------------------------------------

BuildingShape building_shape_chars(const Polygon& b, double corner_angle) {
  BuildingShape s;
  s.area = bg::area(b);
  s.perimeter = bg::perimeter(b);
  for (const auto& h : b.inners()) s.courtyard_area += std::abs(bg::area(h));
  const MultiPolygon mp = to_multi(b);
  const Circle c = min_enclosing_circle(mp);
  if (c.radius > 0) s.circular_compactness = s.area / circle_area(c.radius);

  std::vector<Point> ring;
  for (std::size_t i = 0; i + 1 < b.outer().size(); ++i) {
    if (ring.empty() || distance(ring.back(), b.outer()[i]) > 1e-9) ring.push_back(b.outer()[i]);
  }
  while (ring.size() > 1 && distance(ring.front(), ring.back()) <= 1e-9) ring.pop_back();
  double deviation = 0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n && n >= 3; ++i) {
    const Point& prev = ring[(i + n - 1) % n];
    const Point& cur = ring[i];
    const Point& next = ring[(i + 1) % n];
    const double ax = prev.x() - cur.x(), ay = prev.y() - cur.y();
    const double bx = next.x() - cur.x(), by = next.y() - cur.y();
    const double cosang = std::clamp((ax * bx + ay * by) / (std::hypot(ax, ay) * std::hypot(bx, by)), -1.0, 1.0);
    const double angle = std::acos(cosang) * 180.0 / std::numbers::pi;
    if (angle <= corner_angle + 1e-9) {
      s.corners += 1;
      deviation += std::abs(90.0 - angle);
    }
  }
  if (s.corners > 0) s.squareness = deviation / s.corners;
  const RotatedRect r = min_rotated_rect(mp);
  s.eri = eri(s.area, s.perimeter, r);
  s.elongation = r.length > 0 ? r.width / r.length : kMissing;
  return s;
}

CellShape cell_chars(const MultiPolygon& cell, const Polygon& bld) {
  CellShape s;
  s.area = bg::area(cell);
  if (cell.empty() || s.area <= 0) {
    s.longest_axis = s.circular_compactness = s.eri = s.coverage = kMissing;
    return s;
  }
  const Circle c = min_enclosing_circle(cell);
  s.longest_axis = 2.0 * c.radius;
  s.circular_compactness = s.area / circle_area(c.radius);
  s.eri = eri(s.area, bg::perimeter(cell), min_rotated_rect(cell));
  s.coverage = bg::area(bld) / s.area;
  return s;
}

double linearity(const Linestring& line) {
  const double len = bg::length(line);
  if (len <= 0) return kMissing;
  return distance(line.front(), line.back()) / len;
}

StreetProfile street_profile(const Linestring& line, const FootprintIndex& blds, double step, double cap) {
  StreetProfile p;
  const double len = bg::length(line);
  if (len <= 0 || line.size() < 2) {
    p.width = p.openness = p.width_dev = kMissing;
    return p;
  }
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step - 1e-9)));
  std::vector<double> widths;
  std::size_t hits = 0;
  std::size_t piece = 0;
  double piece_start = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double at = (static_cast<double>(k) + 0.5) * len / static_cast<double>(n);
    double plen = distance(line[piece], line[piece + 1]);
    while (piece + 2 < line.size() && piece_start + plen < at) {
      piece_start += plen;
      ++piece;
      plen = distance(line[piece], line[piece + 1]);
    }
    const Point& a = line[piece];
    const Point& b = line[piece + 1];
    const double t = plen > 0 ? std::clamp((at - piece_start) / plen, 0.0, 1.0) : 0.0;
    const Point o{a.x() + t * (b.x() - a.x()), a.y() + t * (b.y() - a.y())};
    const double ux = plen > 0 ? (b.x() - a.x()) / plen : 1.0, uy = plen > 0 ? (b.y() - a.y()) / plen : 0.0;
    double w = 0;
    for (double side : {1.0, -1.0}) {
      const double d = first_hit(o, -uy * side, ux * side, cap, blds);
      if (d >= 0) {
        ++hits;
        w += d;
      } else {
        w += cap;
      }
    }
    widths.push_back(w);
  }
  p.sections = widths.size();
  double sum = 0;
  for (double w : widths) sum += w;
  p.width = sum / static_cast<double>(widths.size());
  p.openness = 1.0 - static_cast<double>(hits) / (2.0 * static_cast<double>(widths.size()));
  p.width_dev = population_std(widths);
  return p;
}

// --- street network -----------------------------------------------------------

std::vector<std::vector<std::size_t>> segment_adjacency(const StreetGraph& graph) {
  std::vector<std::vector<std::size_t>> adj(graph.segment_count());
  for (const auto& node : graph.nodes) {
    for (auto a : node.incident) {
      for (auto b : node.incident) {
        if (a != b) adj[a].push_back(b);
      }
    }
  }
  for (auto& v : adj) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return adj;
}

std::vector<std::size_t> node_neighborhood(const StreetGraph& graph, std::size_t v, int radius) {
  return bfs(simple_node_adjacency(graph), v, radius);
}

namespace {

EgoStats ego_from(const StreetGraph& g, const std::vector<std::vector<std::size_t>>& adj, std::size_t v, int radius,
                  bool metric) {
  EgoStats st;
  const auto members = bfs(adj, v, radius);
  std::unordered_map<std::size_t, std::size_t> local;
  for (std::size_t i = 0; i < members.size(); ++i) local.emplace(members[i], i);
  std::set<std::size_t> segs;
  for (auto u : members) {
    for (auto s : g.nodes[u].incident) {
      const auto [a, b] = g.ends[s];
      if (local.contains(a) && local.contains(b)) segs.insert(s);
    }
  }
  st.nodes = members.size();
  st.edges = segs.size();
  std::vector<double> sub_degree(members.size(), 0);
  std::vector<std::vector<std::pair<std::size_t, double>>> wadj(members.size());
  for (auto s : segs) {
    st.length += g.lengths[s];
    const auto ia = local[g.ends[s].first], ib = local[g.ends[s].second];
    sub_degree[ia] += 1;
    sub_degree[ib] += 1;
    if (ia != ib) {
      const double w = metric ? g.lengths[s] : 1.0;
      wadj[ia].emplace_back(ib, w);
      wadj[ib].emplace_back(ia, w);
    }
  }
  const double nv = static_cast<double>(st.nodes);
  const double denom = 2.0 * nv - 5.0;
  st.meshedness = denom > 0 ? std::clamp((static_cast<double>(st.edges) - nv + 1.0) / denom, 0.0, 1.0) : 0.0;
  st.density = st.length > 0 ? nv / st.length : kMissing;
  std::size_t c1 = 0, c3 = 0, c4 = 0;
  double wsum = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto d = g.nodes[members[i]].degree();
    c1 += d == 1;
    c3 += d == 3;
    c4 += d == 4;
    wsum += sub_degree[i] - 1.0;
  }
  st.p_cds = static_cast<double>(c1) / nv;
  st.p3w = static_cast<double>(c3) / nv;
  st.p4w = static_cast<double>(c4) / nv;
  st.weighted_density = st.length > 0 ? wsum / st.length : kMissing;

  std::vector<double> dist(members.size(), std::numeric_limits<double>::infinity());
  using QE = std::pair<double, std::size_t>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  dist[local[v]] = 0;
  pq.emplace(0.0, local[v]);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (auto [w, len] : wadj[u]) {
      if (d + len < dist[w]) {
        dist[w] = d + len;
        pq.emplace(dist[w], w);
      }
    }
  }
  double total = 0;
  std::size_t reached = 0;
  for (double d : dist) {
    if (std::isfinite(d)) {
      total += d;
      ++reached;
    }
  }
  st.closeness = total > 0 ? static_cast<double>(reached - 1) / total : 0.0;
  return st;
}

}  // namespace

EgoStats ego_stats(const StreetGraph& graph, std::size_t v, int radius, bool metric) {
  return ego_from(graph, simple_node_adjacency(graph), v, radius, metric);
}

std::vector<double> square_clustering(const StreetGraph& graph) {
  const auto adj = simple_node_adjacency(graph);
  std::vector<double> out(adj.size(), 0.0);
  auto connected = [&](std::size_t a, std::size_t b) { return std::binary_search(adj[a].begin(), adj[a].end(), b); };
  for (std::size_t v = 0; v < adj.size(); ++v) {
    const auto& nv = adj[v];
    double num = 0, den = 0;
    for (std::size_t i = 0; i < nv.size(); ++i) {
      for (std::size_t j = i + 1; j < nv.size(); ++j) {
        const auto u = nv[i], w = nv[j];
        std::vector<std::size_t> common;
        std::set_intersection(adj[u].begin(), adj[u].end(), adj[w].begin(), adj[w].end(), std::back_inserter(common));
        const double q = static_cast<double>(common.size()) - (std::binary_search(common.begin(), common.end(), v) ? 1 : 0);
        const double theta = connected(u, w) ? 1.0 : 0.0;
        const double a = (static_cast<double>(adj[u].size()) - (1.0 + q + theta)) *
                         (static_cast<double>(adj[w].size()) - (1.0 + q + theta));
        num += q;
        den += a + q;
      }
    }
    out[v] = den > 0 ? num / den : 0.0;
  }
  return out;
}

NetworkChars network_chars(const StreetGraph& graph, std::span<const Segment> segs, std::span<const TessCell> cells,
                           std::span<const Footprint> blds, const FootprintIndex& index, const MorphConfig& cfg) {
  NetworkChars nc;
  const std::size_t ns = graph.segment_count(), nn = graph.node_count();
  std::vector<double> seg_cells(ns, 0), node_cells(nn, 0);
  nc.seg_area.assign(ns, 0);
  nc.node_area.assign(nn, 0);
  std::vector<std::vector<double>> node_bld_areas(nn);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double a = bg::area(cells[i].shape);
    if (cells[i].segment_id >= 0) {
      const auto s = static_cast<std::size_t>(cells[i].segment_id);
      seg_cells[s] += 1;
      nc.seg_area[s] += a;
    }
    if (cells[i].node_id >= 0) {
      const auto v = static_cast<std::size_t>(cells[i].node_id);
      node_cells[v] += 1;
      nc.node_area[v] += a;
      node_bld_areas[v].push_back(bg::area(blds[i].shape));
    }
  }
  nc.seg_length = graph.lengths;
  nc.seg_linearity.resize(ns);
  nc.seg_bpm.resize(ns);
  nc.seg_profile.resize(ns);
  nc.seg_reach_area.resize(ns);
  nc.seg_mean_length.resize(ns);
  nc.seg_reach_cells.resize(ns);
  const auto sadj = segment_adjacency(graph);
  parallel_for(ns, cfg.workers, [&](std::size_t s) {
    nc.seg_linearity[s] = linearity(segs[s].points);
    nc.seg_bpm[s] = nc.seg_length[s] > 0 ? seg_cells[s] / nc.seg_length[s] : kMissing;
    nc.seg_profile[s] = street_profile(segs[s].points, index, cfg.profile_step, cfg.profile_cap);
    double area1 = 0;
    for (auto t : bfs(sadj, s, 1)) area1 += nc.seg_area[t];
    nc.seg_reach_area[s] = area1;
    Stats len3;
    double cells3 = 0;
    for (auto t : bfs(sadj, s, cfg.reach_order)) {
      len3.add(nc.seg_length[t]);
      cells3 += seg_cells[t];
    }
    nc.seg_mean_length[s] = len3.mean();
    nc.seg_reach_cells[s] = cells3;
  });

  const auto nadj = simple_node_adjacency(graph);
  for (auto* v : {&nc.node_degree, &nc.node_mean_dist, &nc.node_reach_cells1, &nc.node_reach_area1,
                  &nc.node_meshedness, &nc.node_cds_length, &nc.node_density, &nc.node_reach_cells3,
                  &nc.node_reach_area3, &nc.node_p_cds, &nc.node_p3w, &nc.node_p4w, &nc.node_weighted_density,
                  &nc.node_closeness, &nc.node_bld_area_dev}) {
    v->assign(nn, kMissing);
  }
  parallel_for(nn, cfg.workers, [&](std::size_t v) {
    const auto& node = graph.nodes[v];
    nc.node_degree[v] = static_cast<double>(node.degree());
    Stats md;
    for (auto s : node.incident) {
      if (graph.ends[s].first != graph.ends[s].second) md.add(graph.lengths[s]);
    }
    nc.node_mean_dist[v] = md.mean();
    double c1 = 0, a1 = 0;
    for (auto u : bfs(nadj, v, 1)) {
      c1 += node_cells[u];
      a1 += nc.node_area[u];
    }
    nc.node_reach_cells1[v] = c1;
    nc.node_reach_area1[v] = a1;
    const auto reach3 = bfs(nadj, v, cfg.reach_order);
    double c3 = 0, a3 = 0;
    std::set<std::size_t> sub_segs;
    for (auto u : reach3) {
      c3 += node_cells[u];
      a3 += nc.node_area[u];
      for (auto s : graph.nodes[u].incident) {
        const auto [a, b] = graph.ends[s];
        if (std::binary_search(reach3.begin(), reach3.end(), a) && std::binary_search(reach3.begin(), reach3.end(), b)) {
          sub_segs.insert(s);
        }
      }
    }
    nc.node_reach_cells3[v] = c3;
    nc.node_reach_area3[v] = a3;
    double cds = 0;
    for (auto s : sub_segs) {
      const auto [a, b] = graph.ends[s];
      if (graph.nodes[a].degree() == 1 || graph.nodes[b].degree() == 1) cds += graph.lengths[s];
    }
    nc.node_cds_length[v] = cds;
    const EgoStats ego = ego_from(graph, nadj, v, cfg.ego_radius, cfg.metric_closeness);
    nc.node_meshedness[v] = ego.meshedness;
    nc.node_density[v] = ego.density;
    nc.node_p_cds[v] = ego.p_cds;
    nc.node_p3w[v] = ego.p3w;
    nc.node_p4w[v] = ego.p4w;
    nc.node_weighted_density[v] = ego.weighted_density;
    nc.node_closeness[v] = ego.closeness;
    nc.node_bld_area_dev[v] = population_std(node_bld_areas[v]);
  });
  nc.node_square_clustering = square_clustering(graph);
  return nc;
}

// --- buildings in context -----------------------------------------------------

std::vector<JoinedStructure> joined_structures(std::span<const Footprint> blds, const ContiguityGraph& bld_adj,
                                               double adjacency_tol, unsigned workers) {
  const auto comp = bld_adj.components();
  std::size_t count = 0;
  for (auto c : comp) count = std::max(count, c + 1);
  std::vector<JoinedStructure> out(count);
  for (std::size_t i = 0; i < comp.size(); ++i) {
    out[comp[i]].members.push_back(i);
    out[comp[i]].member_area += bg::area(blds[i].shape);
  }
  parallel_for(count, workers, [&](std::size_t c) {
    auto& js = out[c];
    if (js.members.size() == 1) {
      js.shape = to_multi(blds[js.members[0]].shape);
      return;
    }
    std::vector<Polygon> parts;
    for (auto m : js.members) parts.push_back(blds[m].shape);
    // slightly above half the tolerance so gaps of exactly `tol` close
    js.shape = dissolve(parts, adjacency_tol / 2.0 + 1e-6);
  });
  return out;
}

BuildingContext context_chars(std::span<const Footprint> blds, std::span<const TessCell> cells,
                              const ContiguityGraph& cell_graph, const ContiguityGraph& bld_adj,
                              const std::vector<JoinedStructure>& joined, const MorphConfig& cfg) {
  const std::size_t n = blds.size();
  BuildingContext bc;
  for (auto* v : {&bc.shared_walls, &bc.neighbor_dist, &bc.courtyards, &bc.outer_wall, &bc.inter_bld_dist,
                  &bc.adjacency, &bc.joined_count, &bc.joined_area, &bc.joined_perimeter, &bc.joined_elongation,
                  &bc.joined_eri, &bc.joined_cco, &bc.joined_lal, &bc.joined_facade, &bc.joined_square_compactness,
                  &bc.weighted_neighbors, &bc.neighbor_area, &bc.reached_blocks, &bc.neighbor_area_dev}) {
    v->assign(n, kMissing);
  }
  std::vector<double> bld_area(n), cell_area(n);
  for (std::size_t i = 0; i < n; ++i) {
    bld_area[i] = bg::area(blds[i].shape);
    cell_area[i] = bg::area(cells[i].shape);
  }
  std::vector<std::size_t> structure_of(n, 0);
  for (std::size_t c = 0; c < joined.size(); ++c) {
    for (auto m : joined[c].members) structure_of[m] = c;
  }
  struct JoinedChars {
    double courtyards, outer, perimeter;
    ShapeOf shape;
  };
  std::vector<JoinedChars> jc(joined.size());
  parallel_for(joined.size(), cfg.workers, [&](std::size_t c) {
    jc[c] = {static_cast<double>(hole_count(joined[c].shape)), exterior_length(joined[c].shape),
             static_cast<double>(bg::perimeter(joined[c].shape)), shape_of(joined[c].shape)};
  });

  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const double perim = bg::perimeter(blds[i].shape);
    double shared = 0;
    for (auto j : bld_adj.neighbors(i)) shared += shared_boundary_length(blds[i].shape, blds[j].shape, cfg.adjacency_tol);
    bc.shared_walls[i] = perim > 0 ? std::min(1.0, shared / perim) : kMissing;

    Stats nd;
    std::vector<double> nareas;
    double area1 = cell_area[i];
    for (auto j : cell_graph.neighbors(i)) {
      nd.add(bg::distance(blds[i].shape, blds[j].shape));
      nareas.push_back(bld_area[j]);
      area1 += cell_area[j];
    }
    bc.neighbor_dist[i] = nd.mean();
    bc.neighbor_area_dev[i] = population_std(nareas);
    bc.neighbor_area[i] = area1;
    const double cell_perim = bg::perimeter(cells[i].shape);
    bc.weighted_neighbors[i] = cell_perim > 0 ? static_cast<double>(cell_graph.degree(i)) / cell_perim : kMissing;

    const auto reach = cell_graph.neighborhood(i, cfg.reach_order);
    Stats ibd;
    double area3 = 0;
    std::set<Id> encl;
    for (auto j : reach) {
      area3 += cell_area[j];
      encl.insert(cells[j].enclosure_id);
      if (j != i) ibd.add(bg::distance(blds[i].shape, blds[j].shape));
    }
    bc.inter_bld_dist[i] = ibd.mean();
    bc.reached_blocks[i] = area3 > 0 ? static_cast<double>(encl.size()) / area3 : kMissing;
    // components of the adjacency graph restricted to the neighbourhood
    std::unordered_map<std::size_t, std::size_t> parent;
    for (auto j : reach) parent[j] = j;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::size_t components = reach.size();
    for (auto j : reach) {
      for (auto k : bld_adj.neighbors(j)) {
        if (k <= j || !parent.contains(k)) continue;
        const auto a = find(j), b = find(k);
        if (a != b) {
          parent[std::max(a, b)] = std::min(a, b);
          --components;
        }
      }
    }
    bc.adjacency[i] = static_cast<double>(components) / static_cast<double>(reach.size());

    const auto c = structure_of[i];
    const auto& js = joined[c];
    bc.courtyards[i] = jc[c].courtyards;
    bc.outer_wall[i] = jc[c].outer;
    bc.joined_count[i] = static_cast<double>(bld_adj.degree(i));
    bc.joined_area[i] = js.member_area;
    bc.joined_perimeter[i] = jc[c].perimeter;
    bc.joined_elongation[i] = jc[c].shape.elongation;
    bc.joined_eri[i] = jc[c].shape.eri;
    bc.joined_cco[i] = jc[c].shape.cco;
    bc.joined_lal[i] = jc[c].shape.lal;
    if (jc[c].perimeter > 0) {
      bc.joined_facade[i] = js.member_area / jc[c].perimeter;
      const double r = 4.0 * std::sqrt(js.member_area) / jc[c].perimeter;
      bc.joined_square_compactness[i] = r * r;
    }
  });
  return bc;
}

// --- assembly -------------------------------------------------------------------

FeatureTable measure_characters(const MorphologyInput& in, const MorphConfig& cfg) {
  const std::size_t n = in.blds.size();
  if (in.cells.size() != n) throw Error("cells and buildings differ in count");
  std::vector<Id> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = in.cells[i].id;
  FeatureTable t(ids, character_names());

  const FootprintIndex index(in.blds);
  std::vector<BuildingShape> bshape(n);
  std::vector<CellShape> cshape(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    bshape[i] = building_shape_chars(in.blds[i].shape, cfg.corner_angle);
    cshape[i] = cell_chars(in.cells[i].shape, in.blds[i].shape);
  });
  const auto joined = joined_structures(in.blds, *in.bld_adj, cfg.adjacency_tol, cfg.workers);
  const auto ctx = context_chars(in.blds, in.cells, *in.cell_graph, *in.bld_adj, joined, cfg);
  const bool streets = in.graph != nullptr && in.graph->segment_count() > 0;
  NetworkChars net;
  if (streets) net = network_chars(*in.graph, in.segs, in.cells, in.blds, index, cfg);

  // written in character_specs() order
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t col = 0;
    auto put = [&](double v) { t.at(i, col++) = v; };
    const auto& b = bshape[i];
    for (double v : {b.area, b.perimeter, b.courtyard_area, b.circular_compactness, b.corners, b.squareness, b.eri,
                     b.elongation}) {
      put(v);
    }
    const auto& c = cshape[i];
    for (double v : {c.longest_axis, c.area, c.circular_compactness, c.eri, c.coverage}) put(v);
    const auto s = streets ? in.cells[i].segment_id : -1;
    const auto v = streets ? in.cells[i].node_id : -1;
    auto seg = [&](const std::vector<double>& col_values) {
      return s >= 0 ? col_values[static_cast<std::size_t>(s)] : kMissing;
    };
    auto node = [&](const std::vector<double>& col_values) {
      return v >= 0 ? col_values[static_cast<std::size_t>(v)] : kMissing;
    };
    const StreetProfile prof = s >= 0 ? net.seg_profile[static_cast<std::size_t>(s)]
                                      : StreetProfile{kMissing, kMissing, kMissing, 0};
    put(seg(net.seg_length));
    put(prof.width);
    put(prof.openness);
    put(prof.width_dev);
    put(seg(net.seg_linearity));
    put(seg(net.seg_area));
    put(seg(net.seg_bpm));
    put(node(net.node_area));
    put(ctx.shared_walls[i]);
    put(ctx.neighbor_dist[i]);
    put(ctx.weighted_neighbors[i]);
    put(ctx.neighbor_area[i]);
    put(seg(net.seg_reach_area));
    put(node(net.node_degree));
    put(node(net.node_mean_dist));
    put(node(net.node_reach_cells1));
    put(node(net.node_reach_area1));
    put(ctx.courtyards[i]);
    put(ctx.outer_wall[i]);
    put(ctx.inter_bld_dist[i]);
    put(ctx.adjacency[i]);
    put(ctx.reached_blocks[i]);
    put(node(net.node_meshedness));
    put(seg(net.seg_mean_length));
    put(node(net.node_cds_length));
    put(seg(net.seg_reach_cells));
    put(node(net.node_density));
    put(node(net.node_reach_cells3));
    put(node(net.node_reach_area3));
    put(node(net.node_p_cds));
    put(node(net.node_p3w));
    put(node(net.node_p4w));
    put(node(net.node_weighted_density));
    put(node(net.node_closeness));
    put(node(net.node_square_clustering));
    put(ctx.joined_count[i]);
    put(ctx.joined_area[i]);
    put(ctx.joined_perimeter[i]);
    put(ctx.joined_elongation[i]);
    put(ctx.joined_eri[i]);
    put(ctx.joined_cco[i]);
    put(ctx.joined_lal[i]);
    put(ctx.joined_facade[i]);
    put(ctx.joined_square_compactness[i]);
    put(ctx.neighbor_area_dev[i]);
    put(node(net.node_bld_area_dev));
  }
  return t;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return kMissing;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

std::size_t impute_missing(FeatureTable& t, std::span<const Id> enclosure_of) {
  std::size_t filled = 0;
  for (std::size_t c = 0; c < t.cols(); ++c) {
    auto& col = t.column(c);
    std::vector<double> all;
    std::unordered_map<Id, std::vector<double>> by_encl;
    bool any_missing = false;
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (is_missing(col[r])) {
        any_missing = true;
        continue;
      }
      all.push_back(col[r]);
      if (!enclosure_of.empty()) by_encl[enclosure_of[r]].push_back(col[r]);
    }
    if (!any_missing) continue;
    double global = median_of(all);
    if (is_missing(global)) global = 0.0;
    std::unordered_map<Id, double> medians;
    for (auto& [e, vals] : by_encl) medians[e] = median_of(std::move(vals));
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (!is_missing(col[r])) continue;
      double v = global;
      if (!enclosure_of.empty()) {
        auto it = medians.find(enclosure_of[r]);
        if (it != medians.end()) v = it->second;
      }
      col[r] = v;
      ++filled;
    }
  }
  return filled;
}

FeatureTable assemble_feature_table(const MorphologyInput& in, const MorphConfig& cfg) {
  FeatureTable t = measure_characters(in, cfg);
  std::vector<Id> encl(in.cells.size());
  for (std::size_t i = 0; i < encl.size(); ++i) encl[i] = in.cells[i].enclosure_id;
  impute_missing(t, encl);
  return t;
}

MorphotopeExtras morphotope_extras(std::span<const std::size_t> members, std::span<const Footprint> blds,
                                   const ContiguityGraph& bld_adj, double adjacency_tol) {
  MorphotopeExtras ex;
  std::vector<std::size_t> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());
  auto in_set = [&](std::size_t v) { return std::binary_search(sorted.begin(), sorted.end(), v); };
  std::vector<char> seen(sorted.size(), 0);
  struct Component {
    double area, perimeter;
    std::size_t first;
    bool courtyard_free, blocky;
  };
  std::vector<Component> comps;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (seen[k]) continue;
    std::vector<std::size_t> group{sorted[k]};
    seen[k] = 1;
    for (std::size_t h = 0; h < group.size(); ++h) {
      for (auto w : bld_adj.neighbors(group[h])) {
        if (!in_set(w)) continue;
        const auto pos = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), w) - sorted.begin());
        if (!seen[pos]) {
          seen[pos] = 1;
          group.push_back(w);
        }
      }
    }
    std::vector<Polygon> parts;
    double area = 0;
    for (auto g : group) {
      parts.push_back(blds[g].shape);
      area += bg::area(blds[g].shape);
    }
    const MultiPolygon shape = parts.size() == 1 ? to_multi(parts[0]) : dissolve(parts, adjacency_tol / 2.0 + 1e-6);
    const double perim = bg::perimeter(shape);
    const RotatedRect r = min_rotated_rect(shape);
    const double elong = r.length > 0 ? r.width / r.length : 1.0;
    const double facade = perim > 0 ? area / perim : 0.0;
    comps.push_back({area, perim, sorted[k], hole_count(shape) == 0, facade > 4.0 && elong < 0.9});
  }
  double free_area = 0, blocky_area = 0;
  for (const auto& c : comps) {
    if (!c.courtyard_free) continue;
    free_area += c.area;
    if (c.blocky) blocky_area += c.area;
  }
  ex.likely_occupied = (free_area > 0 && blocky_area / free_area > 0.4) ? 1 : 0;
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    if (a.area != b.area) return a.area > b.area;
    return a.first < b.first;
  });
  for (std::size_t k = 0; k < comps.size() && k < 10; ++k) {
    ex.area_top10 += comps[k].area;
    ex.perim_top10 += comps[k].perimeter;
  }
  return ex;
}

}  // namespace himoc
