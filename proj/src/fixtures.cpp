#include "himoc/fixtures.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace himoc::fixtures {

namespace {

constexpr double kMargin = 2.0;  // building clearance inside a slot edge

struct Rng {
  std::mt19937_64 gen;
  // portable: the standard distributions are implementation-defined
  double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(gen() >> 11) * 0x1.0p-53; }
};

Polygon box_polygon(double x0, double y0, double x1, double y1) {
  Polygon p;
  bg::append(p.outer(), Point{x0, y0});
  bg::append(p.outer(), Point{x1, y0});
  bg::append(p.outer(), Point{x1, y1});
  bg::append(p.outer(), Point{x0, y1});
  bg::append(p.outer(), Point{x0, y0});
  return p;
}

// collinear axis-aligned street pieces are merged before emission
struct StreetGrid {
  std::map<double, std::vector<std::pair<double, double>>> horizontal, vertical;

  void h(double y, double x0, double x1) { horizontal[y].emplace_back(x0, x1); }
  void v(double x, double y0, double y1) { vertical[x].emplace_back(y0, y1); }

  static std::vector<std::pair<double, double>> merged(std::vector<std::pair<double, double>> iv) {
    std::sort(iv.begin(), iv.end());
    std::vector<std::pair<double, double>> out;
    for (const auto& s : iv) {
      if (!out.empty() && s.first <= out.back().second) {
        out.back().second = std::max(out.back().second, s.second);
      } else {
        out.push_back(s);
      }
    }
    return out;
  }

  std::vector<Segment> segments() const {
    std::vector<Segment> out;
    auto add = [&](Point a, Point b) {
      Segment s;
      s.id = static_cast<Id>(out.size());
      s.points = {a, b};
      s.kind = "residential";
      out.push_back(std::move(s));
    };
    for (const auto& [y, iv] : horizontal) {
      for (auto [a, b] : merged(iv)) add({a, y}, {b, y});
    }
    for (const auto& [x, iv] : vertical) {
      for (auto [a, b] : merged(iv)) add({x, a}, {x, b});
    }
    return out;
  }
};

struct Layout {
  std::size_t cols = 1, rows = 1;
  double slot_w = 0, slot_h = 0;
};

std::size_t auto_cols(std::size_t slots) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(slots)))));
}

struct Ring {
  std::size_t mx = 1, my = 1;
  std::size_t size() const { return 2 * (mx + my); }
};

Ring ring_of(const BlockSpec& b) {
  Ring r;
  r.mx = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround((b.pitch_x - 2 * kMargin) / b.width)));
  const double side = b.pitch_y - 2 * kMargin - 2 * b.depth;
  r.my = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(side / b.width)));
  return r;
}

std::size_t terrace_per_row(const BlockSpec& b) { return b.per_row ? b.per_row : 10; }

Layout layout_of(const BlockSpec& b, double jitter) {
  Layout l;
  const auto fail = [&](const std::string& why) {
    throw Error("fixtures: " + pattern_name(b.pattern) + " block " + why);
  };
  if (b.count == 0) fail("has no buildings");
  if (!(b.width > 0 && b.depth > 0 && b.pitch_x > 0 && b.pitch_y > 0)) fail("needs positive dimensions");
  switch (b.pattern) {
    case Pattern::detached_grid:
    case Pattern::industrial_halls: {
      l.cols = b.per_row ? b.per_row : auto_cols(b.count);
      l.rows = (b.count + l.cols - 1) / l.cols;
      l.slot_w = b.pitch_x;
      l.slot_h = b.pitch_y;
      if (b.width + 4 * jitter + 2 * kMargin > b.pitch_x || b.depth + 4 * jitter + 2 * kMargin > b.pitch_y) {
        fail("pitch too small for its buildings");
      }
      break;
    }
    case Pattern::terrace_row: {
      const auto per = terrace_per_row(b);
      l.cols = 1;
      l.rows = (b.count + per - 1) / per;
      l.slot_w = static_cast<double>(per) * (b.width + jitter) + 2 * kMargin;
      l.slot_h = b.pitch_y;
      if (b.depth + 2 * jitter + 2 * kMargin > b.pitch_y) fail("pitch too small for its buildings");
      if (b.width <= jitter) fail("width must exceed the jitter");
      break;
    }
    case Pattern::perimeter_block: {
      const auto ring = ring_of(b);
      if (b.count % ring.size() != 0) {
        fail("count must be a multiple of the ring size " + std::to_string(ring.size()));
      }
      if (b.pitch_y - 2 * kMargin - 2 * b.depth <= 1.0 || b.pitch_x - 2 * kMargin - 2 * b.depth <= 1.0) {
        fail("leaves no courtyard");
      }
      const auto blocks = b.count / ring.size();
      l.cols = b.per_row ? b.per_row : auto_cols(blocks);
      l.rows = (blocks + l.cols - 1) / l.cols;
      l.slot_w = b.pitch_x;
      l.slot_h = b.pitch_y;
      break;
    }
  }
  return l;
}

void place_detached(const BlockSpec& b, const Layout& l, double jitter, Rng& rng, std::vector<Polygon>& out) {
  for (std::size_t i = 0; i < b.count; ++i) {
    const double sx = b.origin.x() + static_cast<double>(i % l.cols) * l.slot_w;
    const double sy = b.origin.y() + static_cast<double>(i / l.cols) * l.slot_h;
    const double w = b.width + rng.uniform(-jitter, jitter);
    const double d = b.depth + rng.uniform(-jitter, jitter);
    const double cx = sx + 0.5 * l.slot_w + rng.uniform(-jitter, jitter);
    const double cy = sy + 0.5 * l.slot_h + rng.uniform(-jitter, jitter);
    out.push_back(box_polygon(cx - 0.5 * w, cy - 0.5 * d, cx + 0.5 * w, cy + 0.5 * d));
  }
}

void place_terraces(const BlockSpec& b, const Layout& l, double jitter, Rng& rng, std::vector<Polygon>& out) {
  const auto per = terrace_per_row(b);
  for (std::size_t r = 0; r < l.rows; ++r) {
    const double front = b.origin.y() + static_cast<double>(r) * l.slot_h + 0.5 * (l.slot_h - b.depth);
    double x = b.origin.x() + kMargin;
    for (std::size_t c = 0; c < per && r * per + c < b.count; ++c) {
      const double w = b.width + rng.uniform(-0.5 * jitter, 0.5 * jitter);
      const double d = b.depth + rng.uniform(-jitter, jitter);
      out.push_back(box_polygon(x, front, x + w, front + d));
      x += w;
    }
  }
}

void place_rings(const BlockSpec& b, const Layout& l, std::vector<Polygon>& out) {
  const auto ring = ring_of(b);
  const std::size_t blocks = b.count / ring.size();
  for (std::size_t k = 0; k < blocks; ++k) {
    const double x0 = b.origin.x() + static_cast<double>(k % l.cols) * l.slot_w + kMargin;
    const double y0 = b.origin.y() + static_cast<double>(k / l.cols) * l.slot_h + kMargin;
    const double x1 = x0 + l.slot_w - 2 * kMargin, y1 = y0 + l.slot_h - 2 * kMargin;
    const double d = b.depth;
    const double wx = (x1 - x0) / static_cast<double>(ring.mx);
    const double wy = (y1 - y0 - 2 * d) / static_cast<double>(ring.my);
    for (std::size_t i = 0; i < ring.mx; ++i) {
      out.push_back(box_polygon(x0 + wx * static_cast<double>(i), y0, x0 + wx * static_cast<double>(i + 1), y0 + d));
    }
    for (std::size_t i = 0; i < ring.my; ++i) {
      const double ya = y0 + d + wy * static_cast<double>(i), yb = y0 + d + wy * static_cast<double>(i + 1);
      out.push_back(box_polygon(x1 - d, ya, x1, yb));
    }
    for (std::size_t i = ring.mx; i-- > 0;) {
      out.push_back(box_polygon(x0 + wx * static_cast<double>(i), y1 - d, x0 + wx * static_cast<double>(i + 1), y1));
    }
    for (std::size_t i = ring.my; i-- > 0;) {
      const double ya = y0 + d + wy * static_cast<double>(i), yb = y0 + d + wy * static_cast<double>(i + 1);
      out.push_back(box_polygon(x0, ya, x0 + d, yb));
    }
  }
}

}  // namespace

std::string pattern_name(Pattern p) {
  switch (p) {
    case Pattern::detached_grid: return "detached-grid";
    case Pattern::terrace_row: return "terrace-row";
    case Pattern::perimeter_block: return "perimeter-block";
    case Pattern::industrial_halls: return "industrial-halls";
  }
  return "?";
}

Pattern parse_pattern(std::string_view name) {
  for (auto p : {Pattern::detached_grid, Pattern::terrace_row, Pattern::perimeter_block, Pattern::industrial_halls}) {
    if (pattern_name(p) == name) return p;
  }
  throw Error("fixtures: unknown pattern " + std::string(name));
}

Scene generate(const SceneSpec& spec) {
  if (spec.jitter < 0) throw Error("fixtures: jitter must not be negative");
  Scene s;
  std::vector<Layout> layouts;
  for (const auto& b : spec.blocks) {
    layouts.push_back(layout_of(b, spec.jitter));
    const auto& l = layouts.back();
    s.extents.push_back(Box{b.origin, {b.origin.x() + static_cast<double>(l.cols) * l.slot_w,
                                       b.origin.y() + static_cast<double>(l.rows) * l.slot_h}});
    s.patterns.push_back(b.pattern);
  }
  for (std::size_t i = 0; i < s.extents.size(); ++i) {
    for (std::size_t j = i + 1; j < s.extents.size(); ++j) {
      const auto& a = s.extents[i];
      const auto& c = s.extents[j];
      const double ox = std::min(a.max_corner().x(), c.max_corner().x()) - std::max(a.min_corner().x(), c.min_corner().x());
      const double oy = std::min(a.max_corner().y(), c.max_corner().y()) - std::max(a.min_corner().y(), c.min_corner().y());
      if (ox > 0 && oy > 0) {
        throw Error("fixtures: blocks " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }
  StreetGrid streets;
  for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
    const auto& b = spec.blocks[k];
    const auto& l = layouts[k];
    Rng rng{std::mt19937_64(spec.seed * 0x9E3779B97F4A7C15ULL + k)};
    std::vector<Polygon> polys;
    switch (b.pattern) {
      case Pattern::detached_grid:
      case Pattern::industrial_halls: place_detached(b, l, spec.jitter, rng, polys); break;
      case Pattern::terrace_row: place_terraces(b, l, spec.jitter, rng, polys); break;
      case Pattern::perimeter_block: place_rings(b, l, polys); break;
    }
    for (auto& p : polys) {
      bg::correct(p);
      s.footprints.push_back({static_cast<Id>(s.footprints.size()), std::move(p)});
      s.labels.push_back(static_cast<int>(k));
    }
    const auto& e = s.extents[k];
    const double x0 = e.min_corner().x(), x1 = e.max_corner().x();
    const double y0 = e.min_corner().y(), y1 = e.max_corner().y();
    for (std::size_t r = 0; r <= l.rows; ++r) streets.h(y0 + static_cast<double>(r) * l.slot_h, x0, x1);
    streets.v(x0, y0, y1);
    streets.v(x1, y0, y1);
    if (b.pattern == Pattern::perimeter_block) {
      for (std::size_t c = 1; c < l.cols; ++c) streets.v(x0 + static_cast<double>(c) * l.slot_w, y0, y1);
    }
  }
  s.segments = streets.segments();
  return s;
}

SceneSpec two_pattern_spec(std::uint64_t seed, std::size_t rows) {
  SceneSpec s;
  s.seed = seed;
  BlockSpec small{Pattern::detached_grid, {0, 0}, 16, 20, 8, 10, 8 * rows, 8};
  BlockSpec large{Pattern::detached_grid, {128, 0}, 32, 20, 22, 12, 8 * rows, 8};
  s.blocks = {small, large};
  return s;
}

SceneSpec four_pattern_spec(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.blocks = {
      {Pattern::detached_grid, {0, 0}, 18, 22, 9, 11, 100, 10},
      {Pattern::terrace_row, {180, 0}, 6, 22, 6, 10, 100, 10},
      {Pattern::perimeter_block, {0, 220}, 60, 60, 10, 12, 72, 2},
      {Pattern::industrial_halls, {240, 220}, 60, 45, 40, 28, 30, 5},
  };
  return s;
}

std::string spec_to_json(const SceneSpec& spec) {
  using nlohmann::json;
  json blocks = json::array();
  for (const auto& b : spec.blocks) {
    blocks.push_back({{"pattern", pattern_name(b.pattern)},
                      {"origin", {b.origin.x(), b.origin.y()}},
                      {"pitch", {b.pitch_x, b.pitch_y}},
                      {"size", {b.width, b.depth}},
                      {"count", b.count},
                      {"per_row", b.per_row}});
  }
  return json{{"seed", spec.seed}, {"jitter", spec.jitter}, {"blocks", blocks}}.dump(1) + "\n";
}

SceneSpec spec_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SceneSpec s;
    s.seed = j.value("seed", s.seed);
    s.jitter = j.value("jitter", s.jitter);
    for (const auto& b : j.at("blocks")) {
      BlockSpec k;
      k.pattern = parse_pattern(b.at("pattern").get<std::string>());
      k.origin = Point{b.at("origin").at(0).get<double>(), b.at("origin").at(1).get<double>()};
      k.pitch_x = b.at("pitch").at(0).get<double>();
      k.pitch_y = b.at("pitch").at(1).get<double>();
      k.width = b.at("size").at(0).get<double>();
      k.depth = b.at("size").at(1).get<double>();
      k.count = b.at("count").get<std::size_t>();
      k.per_row = b.value("per_row", std::size_t{0});
      s.blocks.push_back(k);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("fixtures: bad scene spec: ") + e.what());
  }
}

std::string labels_to_csv(const Scene& scene) {
  std::ostringstream os;
  os << "building_id,block,pattern\n";
  for (std::size_t i = 0; i < scene.footprints.size(); ++i) {
    const auto block = static_cast<std::size_t>(scene.labels[i]);
    os << scene.footprints[i].id << ',' << block << ',' << pattern_name(scene.patterns[block]) << '\n';
  }
  return os.str();
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("adjusted_rand_index: labelings differ in length");
  const double n = static_cast<double>(a.size());
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = n > 1 ? sa * sb / c2(n) : 0.0;
  const double top = 0.5 * (sa + sb);
  if (top == expected) return 1.0;  // both trivial
  return (index - expected) / (top - expected);
}

}  // namespace himoc::fixtures
