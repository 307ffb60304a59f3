#include "himoc/evaluation.hpp"

#include "himoc/parallel.hpp"

#include "json.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace himoc {

namespace bgi = bg::index;

ConfusionMatrix cross_tabulate(const std::vector<Footprint>& blds, const std::vector<int>& branch,
                               const std::vector<io::LabeledPolygon>& external, unsigned workers) {
  if (branch.size() != blds.size()) throw Error("cross_tabulate: one branch label per building expected");
  using Entry = std::pair<Box, std::size_t>;
  std::vector<Entry> boxes;
  for (std::size_t i = 0; i < external.size(); ++i) boxes.emplace_back(envelope(external[i].shape), i);
  const bgi::rtree<Entry, bgi::rstar<16>> tree(boxes.begin(), boxes.end());

  std::vector<std::string> cls(blds.size(), kUnmatched);
  parallel_for(blds.size(), workers, [&](std::size_t b) {
    const Point p = representative_point(blds[b].shape);
    std::size_t best = external.size();
    for (auto it = tree.qbegin(bgi::covers(p)); it != tree.qend(); ++it) {
      if (it->second < best && bg::covered_by(p, external[it->second].shape)) best = it->second;
    }
    if (best < external.size()) cls[b] = external[best].label;
  });

  ConfusionMatrix m;
  std::set<int> rows(branch.begin(), branch.end());
  std::set<std::string> named;
  bool unmatched = false;
  for (const auto& c : cls) {
    if (c == kUnmatched) {
      unmatched = true;
    } else {
      named.insert(c);
    }
  }
  m.branches.assign(rows.begin(), rows.end());
  m.classes.assign(named.begin(), named.end());
  if (unmatched) m.classes.push_back(kUnmatched);
  m.counts.assign(m.branches.size(), std::vector<std::size_t>(m.classes.size(), 0));
  std::map<int, std::size_t> row_of;
  std::map<std::string, std::size_t> col_of;
  for (std::size_t r = 0; r < m.branches.size(); ++r) row_of[m.branches[r]] = r;
  for (std::size_t c = 0; c < m.classes.size(); ++c) col_of[m.classes[c]] = c;
  for (std::size_t b = 0; b < blds.size(); ++b) ++m.counts[row_of.at(branch[b])][col_of.at(cls[b])];
  m.values.assign(m.branches.size(), std::vector<double>(m.classes.size(), 0.0));
  for (std::size_t r = 0; r < m.branches.size(); ++r) {
    std::size_t total = 0;
    for (auto c : m.counts[r]) total += c;
    if (total == 0) continue;
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
      m.values[r][c] = static_cast<double>(m.counts[r][c]) / static_cast<double>(total);
    }
  }
  return m;
}

std::string confusion_to_csv(const ConfusionMatrix& m) {
  std::ostringstream os;
  os << "branch";
  for (const auto& c : m.classes) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < m.branches.size(); ++r) {
    os << m.branches[r];
    for (double v : m.values[r]) os << ',' << io::format_number(v);
    os << '\n';
  }
  return os.str();
}

std::vector<GridCell> grid_abundance(const std::vector<Footprint>& blds, const std::vector<int>& branch,
                                     const GridSpec& spec) {
  if (branch.size() != blds.size()) throw Error("grid_abundance: one branch label per building expected");
  if (!(spec.cell_size > 0.0)) throw Error("grid_abundance: cell size must be positive");
  if (blds.empty()) return {};
  std::vector<Point> pts(blds.size());
  for (std::size_t b = 0; b < blds.size(); ++b) pts[b] = representative_point(blds[b].shape);
  Point origin;
  if (spec.origin) {
    origin = *spec.origin;
  } else {
    origin = pts.front();
    for (const auto& p : pts) {
      origin.x(std::min(origin.x(), p.x()));
      origin.y(std::min(origin.y(), p.y()));
    }
  }
  using Key = std::pair<std::int64_t, std::int64_t>;  // row, col
  std::map<Key, std::map<int, std::size_t>> counts;
  for (std::size_t b = 0; b < blds.size(); ++b) {
    const auto col = static_cast<std::int64_t>(std::floor((pts[b].x() - origin.x()) / spec.cell_size));
    const auto row = static_cast<std::int64_t>(std::floor((pts[b].y() - origin.y()) / spec.cell_size));
    ++counts[{row, col}][branch[b]];
  }
  std::vector<GridCell> cells;
  std::map<int, double> peak;
  for (const auto& [key, per] : counts) {
    GridCell c;
    const double x0 = origin.x() + static_cast<double>(key.second) * spec.cell_size;
    const double y0 = origin.y() + static_cast<double>(key.first) * spec.cell_size;
    c.box = Box{{x0, y0}, {x0 + spec.cell_size, y0 + spec.cell_size}};
    for (const auto& [b, n] : per) c.total += n;
    for (const auto& [b, n] : per) {
      const double s = static_cast<double>(n) / static_cast<double>(c.total);
      c.share[b] = s;
      peak[b] = std::max(peak[b], s);
    }
    cells.push_back(std::move(c));
  }
  for (auto& c : cells) {
    for (const auto& [b, s] : c.share) c.relative[b] = s / peak[b];
  }
  return cells;
}

std::string grid_to_geojson(const std::vector<GridCell>& cells) {
  using nlohmann::json;
  json features = json::array();
  for (const auto& c : cells) {
    const auto& lo = c.box.min_corner();
    const auto& hi = c.box.max_corner();
    json ring = json::array({json::array({lo.x(), lo.y()}), json::array({hi.x(), lo.y()}),
                             json::array({hi.x(), hi.y()}), json::array({lo.x(), hi.y()}),
                             json::array({lo.x(), lo.y()})});
    json props = {{"total", c.total}};
    for (const auto& [b, s] : c.share) props["share_" + std::to_string(b)] = s;
    for (const auto& [b, r] : c.relative) props["relative_" + std::to_string(b)] = r;
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                        {"properties", props}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump() + "\n";
}

}  // namespace himoc
