#include "himoc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <boost/geometry/index/rtree.hpp>
#include <boost/polygon/polygon.hpp>

namespace himoc {

namespace bgi = boost::geometry::index;

namespace {
std::uint64_t grid_key(std::int64_t x, std::int64_t y) {
  return (static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL) ^ static_cast<std::uint64_t>(y);
}
}  // namespace

int SnapIndex::insert(const Point& p) {
  const auto kx = static_cast<std::int64_t>(std::floor(p.x() / snap_));
  const auto ky = static_cast<std::int64_t>(std::floor(p.y() / snap_));
  for (std::int64_t dx = -1; dx <= 1; ++dx) {
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      auto it = grid_.find(grid_key(kx + dx, ky + dy));
      if (it == grid_.end()) continue;
      for (int id : it->second) {
        if (distance(pts_[id], p) <= snap_) return id;
      }
    }
  }
  const int id = static_cast<int>(pts_.size());
  pts_.push_back(p);
  grid_[grid_key(kx, ky)].push_back(id);
  return id;
}

double distance(const Point& a, const Point& b) {
  return std::hypot(a.x() - b.x(), a.y() - b.y());
}

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

namespace {

Circle circle_from(const Point& a, const Point& b) {
  Point c{(a.x() + b.x()) / 2.0, (a.y() + b.y()) / 2.0};
  return {c, distance(a, b) / 2.0};
}

Circle circle_from(const Point& a, const Point& b, const Point& c) {
  const double bx = b.x() - a.x(), by = b.y() - a.y();
  const double cx = c.x() - a.x(), cy = c.y() - a.y();
  const double d = 2.0 * (bx * cy - by * cx);
  if (std::abs(d) < 1e-18) {
    // collinear: the widest pair spans the circle
    Circle best = circle_from(a, b);
    for (const Circle& alt : {circle_from(a, c), circle_from(b, c)}) {
      if (alt.radius > best.radius) best = alt;
    }
    return best;
  }
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  const double ux = (cy * b2 - by * c2) / d;
  const double uy = (bx * c2 - cx * b2) / d;
  Point center{a.x() + ux, a.y() + uy};
  return {center, std::hypot(ux, uy)};
}

bool covers(const Circle& c, const Point& p) {
  return distance(c.center, p) <= c.radius * (1.0 + 1e-12) + 1e-12;
}

std::vector<Point> hull_points(std::span<const Point> pts) {
  bg::model::multi_point<Point> mp(pts.begin(), pts.end());
  Ring hull;
  bg::convex_hull(mp, hull);
  std::vector<Point> out(hull.begin(), hull.end());
  if (out.size() > 1 && bg::equals(out.front(), out.back())) out.pop_back();
  return out;
}

}  // namespace

Circle min_enclosing_circle(std::span<const Point> input) {
  if (input.empty()) return {};
  std::vector<Point> pts = input.size() > 3 ? hull_points(input)
                                            : std::vector<Point>(input.begin(), input.end());
  if (pts.empty()) pts.assign(input.begin(), input.end());
  Circle c{pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (covers(c, pts[i])) continue;
    c = {pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (covers(c, pts[j])) continue;
      c = circle_from(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (!covers(c, pts[k])) c = circle_from(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

std::vector<Point> exterior_points(const MultiPolygon& mp) {
  std::vector<Point> pts;
  for (const auto& poly : mp) pts.insert(pts.end(), poly.outer().begin(), poly.outer().end());
  return pts;
}

Circle min_enclosing_circle(const MultiPolygon& mp) {
  auto pts = exterior_points(mp);
  return min_enclosing_circle(pts);
}

RotatedRect min_rotated_rect(std::span<const Point> input) {
  RotatedRect best;
  if (input.empty()) return best;
  std::vector<Point> hull = hull_points(input);
  if (hull.size() < 2) {
    best.ring = {input[0], input[0], input[0], input[0], input[0]};
    return best;
  }
  // near-equal areas are settled by the smaller perimeter so the choice does
  // not depend on which hull edge rounding happens to favour
  double best_area = std::numeric_limits<double>::infinity();
  double best_perim = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point& a = hull[i];
    const Point& b = hull[(i + 1) % hull.size()];
    double len = distance(a, b);
    if (len <= 0.0) continue;
    const double ux = (b.x() - a.x()) / len, uy = (b.y() - a.y()) / len;
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const Point& p : hull) {
      const double dx = p.x() - a.x(), dy = p.y() - a.y();
      const double u = dx * ux + dy * uy, v = -dx * uy + dy * ux;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    const double area = (umax - umin) * (vmax - vmin);
    const double perim = 2.0 * ((umax - umin) + (vmax - vmin));
    const double tol = 1e-9 * std::max(1.0, area);
    const bool better = area < best_area - tol ||
                        (area <= best_area + tol && perim < best_perim - 1e-9 * std::max(1.0, perim));
    if (better) {
      best_area = std::min(area, best_area);
      best_perim = perim;
      auto at = [&](double u, double v) {
        return Point{a.x() + u * ux - v * uy, a.y() + u * uy + v * ux};
      };
      best.ring = {at(umin, vmin), at(umax, vmin), at(umax, vmax), at(umin, vmax), at(umin, vmin)};
      best.length = std::max(umax - umin, vmax - vmin);
      best.width = std::min(umax - umin, vmax - vmin);
    }
  }
  return best;
}

RotatedRect min_rotated_rect(const MultiPolygon& mp) {
  auto pts = exterior_points(mp);
  return min_rotated_rect(pts);
}

std::vector<Point> densify_ring(const Ring& ring, double step) {
  std::vector<Point> out;
  if (ring.size() < 2) return out;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point& a = ring[i];
    const Point& b = ring[i + 1];
    const double len = distance(a, b);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step)));
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n);
      out.emplace_back(a.x() + t * (b.x() - a.x()), a.y() + t * (b.y() - a.y()));
    }
  }
  return out;
}

// Scanline interior point: midpoint of the widest span on a horizontal line
// halfway between the two vertex ordinates closest to the bbox centre.
Point representative_point(const Polygon& p) {
  std::vector<double> ys;
  auto collect = [&](const Ring& r) {
    for (const auto& v : r) ys.push_back(v.y());
  };
  collect(p.outer());
  for (const auto& h : p.inners()) collect(h);
  if (ys.empty()) throw std::invalid_argument("representative_point of empty geometry");
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  if (ys.size() < 2) return p.outer().front();
  const double mid = 0.5 * (ys.front() + ys.back());
  double lo = ys.front(), hi = ys.back();
  for (double y : ys) {
    if (y <= mid) lo = y;
    if (y > mid) {
      hi = y;
      break;
    }
  }
  if (hi <= lo) hi = ys.back();
  const double scan = 0.5 * (lo + hi);
  std::vector<double> xs;
  auto crossings = [&](const Ring& r) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      const Point& a = r[i];
      const Point& b = r[i + 1];
      if ((a.y() > scan) != (b.y() > scan)) {
        xs.push_back(a.x() + (scan - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
      }
    }
  };
  crossings(p.outer());
  for (const auto& h : p.inners()) crossings(h);
  std::sort(xs.begin(), xs.end());
  if (xs.size() < 2) return p.outer().front();
  double best_w = -1.0, best_x = xs.front();
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    if (xs[i + 1] - xs[i] > best_w) {
      best_w = xs[i + 1] - xs[i];
      best_x = 0.5 * (xs[i] + xs[i + 1]);
    }
  }
  return {best_x, scan};
}

Point representative_point(const MultiPolygon& mp) {
  if (mp.empty()) throw std::invalid_argument("representative_point of empty geometry");
  std::size_t best = 0;
  double best_area = -1.0;
  for (std::size_t i = 0; i < mp.size(); ++i) {
    const double a = bg::area(mp[i]);
    if (a > best_area) {
      best_area = a;
      best = i;
    }
  }
  return representative_point(mp[best]);
}

MultiPolygon to_multi(const Polygon& p) {
  MultiPolygon mp;
  mp.push_back(p);
  return mp;
}

Box envelope(const MultiPolygon& mp) {
  Box b;
  bg::envelope(mp, b);
  return b;
}

Box expand(const Box& b, double margin) {
  return Box{Point{b.min_corner().x() - margin, b.min_corner().y() - margin},
             Point{b.max_corner().x() + margin, b.max_corner().y() + margin}};
}

bool even_odd_inside(const Point& pt, std::span<const Ring> rings) {
  bool inside = false;
  for (const Ring& r : rings) {
    const std::size_t n = r.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& a = r[i];
      const Point& b = r[j];
      if ((a.y() > pt.y()) != (b.y() > pt.y())) {
        const double x = a.x() + (pt.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
        if (pt.x() < x) inside = !inside;
      }
    }
  }
  return inside;
}

// ---------------------------------------------------------------------------
// Planar arrangement

namespace {

using VertexIndex = SnapIndex;

double signed_area(const std::vector<Point>& pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point& a = pts[i];
    const Point& b = pts[(i + 1) % pts.size()];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return s / 2.0;
}

/// Half-edge structure over noded edges with dangles removed.
struct HalfEdges {
  std::vector<Point> vtx;
  std::vector<int> origin, twin, next, face;
  std::vector<std::vector<int>> cycles;  // half-edge ids per face cycle
  std::vector<double> cycle_area;

  int dest(int h) const { return origin[twin[h]]; }

  explicit HalfEdges(std::span<const LineSeg> noded, double snap) {
    VertexIndex index(snap);
    std::set<std::pair<int, int>> edges;
    for (const auto& s : noded) {
      int a = index.insert(s.first);
      int b = index.insert(s.second);
      if (a == b) continue;
      edges.emplace(std::min(a, b), std::max(a, b));
    }
    vtx = index.points();
    // prune dangling edges
    std::vector<std::vector<int>> adj(vtx.size());
    std::vector<std::pair<int, int>> elist(edges.begin(), edges.end());
    std::vector<char> alive(elist.size(), 1);
    std::vector<int> degree(vtx.size(), 0);
    for (std::size_t e = 0; e < elist.size(); ++e) {
      adj[elist[e].first].push_back(static_cast<int>(e));
      adj[elist[e].second].push_back(static_cast<int>(e));
      ++degree[elist[e].first];
      ++degree[elist[e].second];
    }
    std::vector<int> stack;
    for (std::size_t v = 0; v < vtx.size(); ++v) {
      if (degree[v] == 1) stack.push_back(static_cast<int>(v));
    }
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (degree[v] != 1) continue;
      for (int e : adj[v]) {
        if (!alive[e]) continue;
        alive[e] = 0;
        int w = elist[e].first == v ? elist[e].second : elist[e].first;
        --degree[v];
        if (--degree[w] == 1) stack.push_back(w);
      }
    }
    std::vector<std::vector<int>> out(vtx.size());
    for (std::size_t e = 0; e < elist.size(); ++e) {
      if (!alive[e]) continue;
      const int h = static_cast<int>(origin.size());
      origin.push_back(elist[e].first);
      origin.push_back(elist[e].second);
      twin.push_back(h + 1);
      twin.push_back(h);
      out[elist[e].first].push_back(h);
      out[elist[e].second].push_back(h + 1);
    }
    next.assign(origin.size(), -1);
    std::vector<int> pos(origin.size(), -1);
    for (std::size_t v = 0; v < vtx.size(); ++v) {
      auto& hs = out[v];
      auto angle = [&](int h) {
        const Point& a = vtx[origin[h]];
        const Point& b = vtx[origin[twin[h]]];
        return std::atan2(b.y() - a.y(), b.x() - a.x());
      };
      std::sort(hs.begin(), hs.end(), [&](int a, int b) { return angle(a) < angle(b); });
      for (std::size_t i = 0; i < hs.size(); ++i) pos[hs[i]] = static_cast<int>(i);
    }
    for (std::size_t h = 0; h < origin.size(); ++h) {
      const int t = twin[h];
      const auto& hs = out[origin[t]];
      const int p = pos[t];
      next[h] = hs[(p + static_cast<int>(hs.size()) - 1) % static_cast<int>(hs.size())];
    }
    face.assign(origin.size(), -1);
    for (std::size_t h0 = 0; h0 < origin.size(); ++h0) {
      if (face[h0] >= 0) continue;
      const int id = static_cast<int>(cycles.size());
      std::vector<int> cyc;
      std::vector<Point> pts;
      int h = static_cast<int>(h0);
      while (face[h] < 0) {
        face[h] = id;
        cyc.push_back(h);
        pts.push_back(vtx[origin[h]]);
        h = next[h];
      }
      cycles.push_back(std::move(cyc));
      cycle_area.push_back(signed_area(pts));
    }
  }

  // Splits a face cycle into simple rings by dropping bridge edges.
  std::vector<std::vector<Point>> face_rings(int f) const {
    const auto& cyc = cycles[f];
    std::vector<int> kept;
    for (int h : cyc) {
      if (face[twin[h]] != f) kept.push_back(h);
    }
    std::vector<std::vector<Point>> rings;
    std::vector<char> used(kept.size(), 0);
    for (std::size_t s = 0; s < kept.size(); ++s) {
      if (used[s]) continue;
      std::vector<Point> ring;
      std::size_t cur = s;
      const int start_v = origin[kept[s]];
      while (true) {
        used[cur] = 1;
        ring.push_back(vtx[origin[kept[cur]]]);
        const int end_v = dest(kept[cur]);
        if (end_v == start_v) break;
        std::size_t nxt = cur;
        bool found = false;
        for (std::size_t k = 1; k <= kept.size(); ++k) {
          std::size_t c = (cur + k) % kept.size();
          if (!used[c] && origin[kept[c]] == end_v) {
            nxt = c;
            found = true;
            break;
          }
        }
        if (!found) break;
        cur = nxt;
      }
      if (ring.size() >= 3) rings.push_back(std::move(ring));
    }
    return rings;
  }
};

Ring close_ring(std::vector<Point> pts) {
  Ring r(pts.begin(), pts.end());
  if (!r.empty()) r.push_back(r.front());
  return r;
}

/// Outer rings (ccw) receive holes (cw) by containment.
std::vector<Polygon> assemble_impl(const std::vector<std::vector<Point>>& rings) {
  std::vector<std::pair<double, Ring>> outers, holes;
  for (const auto& r : rings) {
    const double a = signed_area(r);
    if (a > 0) outers.emplace_back(a, close_ring(r));
    else if (a < 0) holes.emplace_back(-a, close_ring(r));
  }
  std::sort(outers.begin(), outers.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<Polygon> polys(outers.size());
  for (std::size_t i = 0; i < outers.size(); ++i) polys[i].outer() = outers[i].second;
  for (auto& [area, hole] : holes) {
    Polygon probe;
    probe.outer() = hole;
    bg::reverse(probe);
    Point inner = representative_point(probe);
    for (std::size_t i = 0; i < outers.size(); ++i) {
      if (outers[i].first > area && bg::within(inner, outers[i].second)) {
        polys[i].inners().push_back(hole);
        break;
      }
    }
  }
  return polys;
}

/// Face polygons of every positive cycle, with the outer boundaries of
/// nested, disconnected components attached as holes. host[c] is the face
/// enclosing a negative cycle c, or -1.
struct ResolvedFaces {
  std::vector<std::vector<Polygon>> polys;
  std::vector<int> host;
};

ResolvedFaces resolve_faces(const HalfEdges& he) {
  const std::size_t nc = he.cycles.size();
  ResolvedFaces rf;
  rf.polys.resize(nc);
  rf.host.assign(nc, -1);
  std::vector<int> comp(he.vtx.size());
  for (std::size_t v = 0; v < comp.size(); ++v) comp[v] = static_cast<int>(v);
  auto find = [&](int v) {
    while (comp[v] != v) v = comp[v] = comp[comp[v]];
    return v;
  };
  for (std::size_t h = 0; h < he.origin.size(); ++h) {
    const int a = find(he.origin[h]), b = find(he.dest(static_cast<int>(h)));
    if (a != b) comp[std::max(a, b)] = std::min(a, b);
  }
  std::vector<Box> boxes(nc);
  for (std::size_t f = 0; f < nc; ++f) {
    if (he.cycle_area[f] <= 0.0) continue;
    rf.polys[f] = assemble_impl(he.face_rings(static_cast<int>(f)));
    bg::assign_inverse(boxes[f]);
    for (const auto& p : rf.polys[f]) {
      Box b;
      bg::envelope(p, b);
      bg::expand(boxes[f], b);
    }
  }
  std::vector<std::pair<int, std::vector<Point>>> holes;
  for (std::size_t c = 0; c < nc; ++c) {
    if (he.cycle_area[c] > 0.0) continue;
    const int own = find(he.origin[he.cycles[c].front()]);
    const Point probe = he.vtx[he.origin[he.cycles[c].front()]];
    int best = -1;
    for (std::size_t f = 0; f < nc; ++f) {
      if (he.cycle_area[f] <= 0.0 || find(he.origin[he.cycles[f].front()]) == own) continue;
      if (!bg::covered_by(probe, boxes[f])) continue;
      if (best >= 0 && he.cycle_area[f] >= he.cycle_area[best]) continue;
      for (const auto& p : rf.polys[f]) {
        if (bg::within(probe, p)) {
          best = static_cast<int>(f);
          break;
        }
      }
    }
    rf.host[c] = best;
    if (best < 0) continue;
    for (auto& r : he.face_rings(static_cast<int>(c))) holes.emplace_back(best, std::move(r));
  }
  for (auto& [f, r] : holes) {
    if (signed_area(r) >= 0.0) continue;
    for (auto& p : rf.polys[f]) {
      if (bg::within(r.front(), p)) {
        p.inners().push_back(close_ring(std::move(r)));
        break;
      }
    }
  }
  return rf;
}

}  // namespace

namespace {

/// Parameters along each segment where some other segment meets it.
struct SplitParams {
  std::vector<double> t{0.0, 1.0};
  bool start_hit = false;
  bool end_hit = false;
};

std::vector<SplitParams> split_params(std::span<const LineSeg> segs, double snap,
                                      std::span<const std::size_t> owner = {}) {
  using Entry = std::pair<Box, std::size_t>;
  std::vector<Entry> boxes;
  boxes.reserve(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    Box b;
    bg::envelope(segs[i], b);
    boxes.emplace_back(expand(b, snap), i);
  }
  bgi::rtree<Entry, bgi::rstar<16>> tree(boxes.begin(), boxes.end());
  std::vector<SplitParams> params(segs.size());

  auto project = [](const LineSeg& s, const Point& p) {
    const double rx = s.second.x() - s.first.x(), ry = s.second.y() - s.first.y();
    const double rr = rx * rx + ry * ry;
    return ((p.x() - s.first.x()) * rx + (p.y() - s.first.y()) * ry) / rr;
  };
  auto record = [&](std::size_t i, double t, double eps) {
    if (t <= eps) params[i].start_hit = true;
    else if (t >= 1.0 - eps) params[i].end_hit = true;
    else params[i].t.push_back(t);
  };
  // consecutive pieces of one polyline always meet at their shared vertex
  auto consecutive = [&](std::size_t i, std::size_t j) {
    return !owner.empty() && owner[i] == owner[j] && j == i + 1;
  };

  for (std::size_t i = 0; i < segs.size(); ++i) {
    const LineSeg& a = segs[i];
    const double la = distance(a.first, a.second);
    if (la <= snap) continue;
    std::vector<Entry> hits;
    tree.query(bgi::intersects(boxes[i].first), std::back_inserter(hits));
    for (const auto& [box, j] : hits) {
      if (j <= i) continue;
      const LineSeg& b = segs[j];
      const double lb = distance(b.first, b.second);
      if (lb <= snap) continue;
      const double rx = a.second.x() - a.first.x(), ry = a.second.y() - a.first.y();
      const double sx = b.second.x() - b.first.x(), sy = b.second.y() - b.first.y();
      const double qpx = b.first.x() - a.first.x(), qpy = b.first.y() - a.first.y();
      const double denom = rx * sy - ry * sx;
      const double et = snap / la, eu = snap / lb;
      if (std::abs(denom) > 1e-12 * la * lb) {
        const double t = (qpx * sy - qpy * sx) / denom;
        const double u = (qpx * ry - qpy * rx) / denom;
        if (t >= -et && t <= 1 + et && u >= -eu && u <= 1 + eu) {
          if (consecutive(i, j) && t >= 1.0 - et && u <= eu) continue;
          record(i, std::clamp(t, 0.0, 1.0), et);
          record(j, std::clamp(u, 0.0, 1.0), eu);
        }
      } else {
        // parallel; collinear overlap contributes endpoints
        const double off = std::abs(qpx * ry - qpy * rx) / la;
        if (off > snap) continue;
        if (consecutive(i, j)) continue;
        for (const Point& p : {b.first, b.second}) {
          const double t = project(a, p);
          if (t >= -et && t <= 1.0 + et) record(i, std::clamp(t, 0.0, 1.0), et);
        }
        for (const Point& p : {a.first, a.second}) {
          const double u = project(b, p);
          if (u >= -eu && u <= 1.0 + eu) record(j, std::clamp(u, 0.0, 1.0), eu);
        }
      }
    }
  }
  for (auto& p : params) std::sort(p.t.begin(), p.t.end());
  return params;
}

Point lerp(const LineSeg& s, double t) {
  if (t == 0.0) return s.first;
  if (t == 1.0) return s.second;
  return {s.first.x() + t * (s.second.x() - s.first.x()), s.first.y() + t * (s.second.y() - s.first.y())};
}

}  // namespace

std::vector<LineSeg> node_segments(std::span<const LineSeg> segs, double snap) {
  const auto params = split_params(segs, snap);
  VertexIndex index(snap);
  std::set<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    int prev = -1;
    for (double t : params[i].t) {
      int v = index.insert(lerp(segs[i], t));
      if (prev >= 0 && prev != v) edges.emplace(std::min(prev, v), std::max(prev, v));
      prev = v;
    }
  }
  const auto& pts = index.points();
  std::vector<LineSeg> out;
  out.reserve(edges.size());
  for (auto [a, b] : edges) out.emplace_back(pts[a], pts[b]);
  return out;
}

std::vector<std::vector<Linestring>> split_polylines(std::span<const Linestring> lines, double snap) {
  std::vector<LineSeg> pieces;
  std::vector<std::size_t> owner;
  std::vector<std::size_t> first(lines.size() + 1, 0);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    first[l] = pieces.size();
    for (std::size_t k = 0; k + 1 < lines[l].size(); ++k) {
      pieces.emplace_back(lines[l][k], lines[l][k + 1]);
      owner.push_back(l);
    }
  }
  first[lines.size()] = pieces.size();
  const auto params = split_params(pieces, snap, owner);

  std::vector<std::vector<Linestring>> out(lines.size());
  for (std::size_t l = 0; l < lines.size(); ++l) {
    Linestring cur;
    auto flush = [&] {
      if (cur.size() >= 2 && bg::length(cur) > snap) out[l].push_back(cur);
      Point last = cur.empty() ? Point{} : cur.back();
      cur.clear();
      cur.push_back(last);
    };
    for (std::size_t k = first[l]; k < first[l + 1]; ++k) {
      const auto& sp = params[k];
      if (cur.empty()) cur.push_back(pieces[k].first);
      if (k > first[l] && (sp.start_hit || params[k - 1].end_hit)) flush();
      for (double t : sp.t) {
        if (t <= 0.0 || t >= 1.0) continue;
        cur.push_back(lerp(pieces[k], t));
        flush();
      }
      cur.push_back(pieces[k].second);
    }
    if (cur.size() >= 2 && bg::length(cur) > snap) out[l].push_back(cur);
    if (out[l].empty() && lines[l].size() >= 2) out[l].push_back(lines[l]);
  }
  return out;
}

std::vector<Polygon> assemble_rings(const std::vector<std::vector<Point>>& rings) {
  return assemble_impl(rings);
}

std::vector<Polygon> bounded_faces(std::span<const LineSeg> noded, double snap) {
  HalfEdges he(noded, snap);
  auto rf = resolve_faces(he);
  std::vector<Polygon> out;
  for (auto& polys : rf.polys) {
    for (auto& p : polys) out.push_back(std::move(p));
  }
  return out;
}

MultiPolygon make_valid(std::span<const Ring> rings) {
  std::vector<LineSeg> edges;
  for (const Ring& r : rings) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) edges.emplace_back(r[i], r[i + 1]);
    if (!r.empty() && !bg::equals(r.front(), r.back())) edges.emplace_back(r.back(), r.front());
  }
  const double snap = 1e-9;
  auto noded = node_segments(edges, snap);
  HalfEdges he(noded, snap);
  auto rf = resolve_faces(he);
  std::vector<char> keep(he.cycles.size(), 0);
  for (std::size_t f = 0; f < he.cycles.size(); ++f) {
    if (rf.polys[f].empty()) continue;
    keep[f] = even_odd_inside(representative_point(rf.polys[f].front()), rings) ? 1 : 0;
  }
  for (std::size_t c = 0; c < he.cycles.size(); ++c) {
    if (rf.host[c] >= 0) keep[c] = keep[rf.host[c]];
  }
  auto boundary = [&](int h) { return keep[he.face[h]] && !keep[he.face[he.twin[h]]]; };
  std::vector<char> used(he.origin.size(), 0);
  std::vector<std::vector<Point>> out_rings;
  for (std::size_t h0 = 0; h0 < he.origin.size(); ++h0) {
    if (used[h0] || !boundary(static_cast<int>(h0))) continue;
    std::vector<Point> ring;
    int h = static_cast<int>(h0);
    while (!used[h]) {
      used[h] = 1;
      ring.push_back(he.vtx[he.origin[h]]);
      int f = he.next[h];
      while (!boundary(f)) f = he.next[he.twin[f]];
      h = f;
    }
    out_rings.push_back(std::move(ring));
  }
  MultiPolygon mp;
  for (auto& p : assemble_impl(out_rings)) mp.push_back(std::move(p));
  return mp;
}

MultiPolygon make_valid(const Polygon& p) {
  if (bg::is_valid(p)) return to_multi(p);
  std::vector<Ring> rings;
  rings.push_back(p.outer());
  for (const auto& h : p.inners()) rings.push_back(h);
  return make_valid(rings);
}

double shared_boundary_length(const Polygon& a, const Polygon& b, double tol) {
  auto edges_of = [](const Polygon& p) {
    std::vector<LineSeg> e;
    auto add = [&](const Ring& r) {
      for (std::size_t i = 0; i + 1 < r.size(); ++i) e.emplace_back(r[i], r[i + 1]);
    };
    add(p.outer());
    for (const auto& h : p.inners()) add(h);
    return e;
  };
  const auto ea = edges_of(a);
  const auto eb = edges_of(b);
  const double max_sin = std::sin(10.0 * M_PI / 180.0);
  double total = 0.0;
  for (const auto& e : ea) {
    const double len = distance(e.first, e.second);
    if (len <= 0.0) continue;
    const double ux = (e.second.x() - e.first.x()) / len;
    const double uy = (e.second.y() - e.first.y()) / len;
    std::vector<std::pair<double, double>> spans;
    for (const auto& f : eb) {
      const double lf = distance(f.first, f.second);
      if (lf <= 0.0) continue;
      const double vx = (f.second.x() - f.first.x()) / lf;
      const double vy = (f.second.y() - f.first.y()) / lf;
      if (std::abs(ux * vy - uy * vx) > max_sin) continue;
      auto along = [&](const Point& p) {
        return (p.x() - e.first.x()) * ux + (p.y() - e.first.y()) * uy;
      };
      auto across = [&](const Point& p) {
        return std::abs(-(p.x() - e.first.x()) * uy + (p.y() - e.first.y()) * ux);
      };
      double t0 = along(f.first), t1 = along(f.second);
      if (t0 > t1) std::swap(t0, t1);
      const double lo = std::max(0.0, t0), hi = std::min(len, t1);
      if (hi <= lo) continue;
      // distance from the overlapping part of f to the line of e
      auto at = [&](double t) {
        const double s = (t - along(f.first)) / (along(f.second) - along(f.first));
        return Point{f.first.x() + s * (f.second.x() - f.first.x()),
                     f.first.y() + s * (f.second.y() - f.first.y())};
      };
      if (across(at(lo)) > tol || across(at(hi)) > tol) continue;
      spans.emplace_back(lo, hi);
    }
    std::sort(spans.begin(), spans.end());
    double cur_lo = -1.0, cur_hi = -1.0;
    for (auto [lo, hi] : spans) {
      if (lo > cur_hi) {
        if (cur_hi > cur_lo) total += cur_hi - cur_lo;
        cur_lo = lo;
        cur_hi = hi;
      } else {
        cur_hi = std::max(cur_hi, hi);
      }
    }
    if (cur_hi > cur_lo) total += cur_hi - cur_lo;
  }
  return total;
}

namespace {

// Integer-grid overlay: floating overlay fails on the near-collinear seams
// that flush terraces and street-aligned cells produce.
namespace gtl = boost::polygon;
using GridCoord = long long;
using GridSet = gtl::polygon_set_data<GridCoord>;

struct Grid {
  Point origin;
  double q = 1.0;  // metres per grid unit, a power of two or `floor`

  Grid(const Box& box, double margin, double floor) : origin(box.min_corner()) {
    const double extent =
        std::max(box.max_corner().x() - box.min_corner().x(), box.max_corner().y() - box.min_corner().y()) + margin;
    q = std::max(floor, std::exp2(std::ceil(std::log2(std::max(extent, 1.0) / 0x1p40))));
  }

  std::vector<gtl::point_data<GridCoord>> ring(const Ring& r) const {
    std::vector<gtl::point_data<GridCoord>> pts;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      pts.emplace_back(std::llround((r[i].x() - origin.x()) / q), std::llround((r[i].y() - origin.y()) / q));
    }
    return pts;
  }

  void insert(GridSet& ps, const Polygon& p) const {
    gtl::polygon_with_holes_data<GridCoord> g;
    const auto outer = ring(p.outer());
    std::vector<gtl::polygon_data<GridCoord>> holes;
    for (const auto& h : p.inners()) {
      const auto pts = ring(h);
      holes.emplace_back(pts.begin(), pts.end());
    }
    g.set(outer.begin(), outer.end());
    g.set_holes(holes.begin(), holes.end());
    ps.insert(g);
  }

  template <class It>
  Ring unring(It begin, It end) const {
    Ring r;
    for (auto it = begin; it != end; ++it) {
      r.push_back({origin.x() + static_cast<double>(gtl::x(*it)) * q,
                   origin.y() + static_cast<double>(gtl::y(*it)) * q});
    }
    if (!r.empty()) r.push_back(r.front());
    return r;
  }

  MultiPolygon polygons(const GridSet& ps) const {
    std::vector<gtl::polygon_with_holes_data<GridCoord>> result;
    ps.get(result);
    MultiPolygon out;
    for (const auto& g : result) {
      Polygon p;
      p.outer() = unring(gtl::begin_points(g), gtl::end_points(g));
      for (auto h = gtl::begin_holes(g); h != gtl::end_holes(g); ++h) {
        p.inners().push_back(unring(gtl::begin_points(*h), gtl::end_points(*h)));
      }
      bg::correct(p);
      out.push_back(std::move(p));
    }
    return out;
  }
};

}  // namespace

MultiPolygon dissolve(std::span<const Polygon> parts, double half_gap) {
  if (parts.empty()) return {};
  Box box;
  bg::envelope(parts[0], box);
  for (const auto& p : parts) bg::expand(box, bg::return_envelope<Box>(p));
  const Grid grid(box, 4.0 * std::max(half_gap, 0.0), 1e-6);
  GridSet ps;
  for (const auto& p : parts) grid.insert(ps, p);
  if (half_gap > 0.0) {
    const GridCoord d = std::llround(half_gap / grid.q);
    ps.resize(d, false, 0);
    ps.resize(-d, false, 0);
  }
  return grid.polygons(ps);
}

double overlap_area(const MultiPolygon& a, const MultiPolygon& b) {
  if (a.empty() || b.empty()) return 0.0;
  const Box ea = envelope(a), eb = envelope(b);
  Box common;
  if (!bg::intersection(ea, eb, common) || bg::area(common) <= 0.0) return 0.0;
  Box box = ea;
  bg::expand(box, eb);
  const Grid grid(box, 0.0, 1e-9);
  GridSet pa, pb;
  for (const auto& p : a) grid.insert(pa, p);
  for (const auto& p : b) grid.insert(pb, p);
  using namespace gtl::operators;
  pa &= pb;
  return bg::area(grid.polygons(pa));
}

}  // namespace himoc
