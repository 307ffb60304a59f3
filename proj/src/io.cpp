#include "himoc/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace himoc::io {

using json = nlohmann::json;

namespace {

Ring ring_from_json(const json& coords) {
  Ring r;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2) throw Error("malformed coordinate");
    r.emplace_back(c[0].get<double>(), c[1].get<double>());
  }
  if (!r.empty() && !bg::equals(r.front(), r.back())) r.push_back(r.front());
  return r;
}

std::vector<std::vector<Ring>> polygons_from_geometry(const json& geom) {
  const std::string type = geom.at("type").get<std::string>();
  std::vector<std::vector<Ring>> out;
  auto one = [](const json& poly) {
    std::vector<Ring> rings;
    for (const auto& r : poly) rings.push_back(ring_from_json(r));
    if (rings.empty()) throw Error("polygon without rings");
    return rings;
  };
  if (type == "Polygon") {
    out.push_back(one(geom.at("coordinates")));
  } else if (type == "MultiPolygon") {
    for (const auto& p : geom.at("coordinates")) out.push_back(one(p));
  } else {
    throw Error("unsupported geometry type " + type);
  }
  return out;
}

json ring_to_json(const Ring& r) {
  json a = json::array();
  for (const auto& p : r) a.push_back({p.x(), p.y()});
  return a;
}

json polygon_to_json(const Polygon& p) {
  json rings = json::array();
  rings.push_back(ring_to_json(p.outer()));
  for (const auto& h : p.inners()) rings.push_back(ring_to_json(h));
  return rings;
}

json feature_collection(json features) {
  return json{{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

json parse_collection(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) throw Error("no features");
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("invalid GeoJSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    throw Error("expected a GeoJSON FeatureCollection");
  }
  if (doc["features"].empty()) throw Error("no features");
  return doc;
}

}  // namespace

std::vector<Footprint> parse_footprints(std::string_view geojson) {
  const json doc = parse_collection(geojson);
  std::vector<Footprint> out;
  std::size_t index = 0;
  for (const auto& feat : doc["features"]) {
    try {
      for (const auto& rings : polygons_from_geometry(feat.at("geometry"))) {
        Polygon direct;
        direct.outer() = rings.front();
        direct.inners().assign(rings.begin() + 1, rings.end());
        bg::correct(direct);
        MultiPolygon valid = bg::is_valid(direct) ? to_multi(direct) : make_valid(std::span<const Ring>(rings));
        for (auto& part : valid) {
          bg::correct(part);
          if (bg::area(part) <= 0.0) continue;
          out.push_back({static_cast<Id>(out.size()), std::move(part)});
        }
      }
    } catch (const std::exception& e) {
      throw Error("feature " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  if (out.empty()) throw Error("no features");
  return out;
}

std::vector<Footprint> load_footprints(const fs::path& path) {
  return parse_footprints(read_file(path));
}

SegmentLoad parse_segments(std::string_view geojson) {
  const json doc = parse_collection(geojson);
  SegmentLoad out;
  std::size_t index = 0;
  for (const auto& feat : doc["features"]) {
    try {
      const json& geom = feat.at("geometry");
      const std::string type = geom.at("type").get<std::string>();
      std::vector<json> parts;
      if (type == "LineString") parts.push_back(geom.at("coordinates"));
      else if (type == "MultiLineString") for (const auto& p : geom.at("coordinates")) parts.push_back(p);
      else throw Error("unsupported geometry type " + type);

      std::string kind = "unclassified";
      bool tunnel = false;
      const json props = feat.value("properties", json::object());
      if (props.is_object() && props.contains("kind") && props["kind"].is_string()) {
        kind = props["kind"].get<std::string>();
      } else {
        ++out.missing_kind;
      }
      if (props.is_object()) {
        for (const char* key : {"tunnel", "is_tunnel"}) {
          if (props.contains(key) && props[key].is_boolean()) tunnel = tunnel || props[key].get<bool>();
        }
      }
      for (const auto& coords : parts) {
        Linestring ls;
        for (const auto& c : coords) {
          Point p{c.at(0).get<double>(), c.at(1).get<double>()};
          if (ls.empty() || !bg::equals(ls.back(), p)) ls.push_back(p);
        }
        if (ls.size() < 2 || bg::length(ls) <= 0.0) {
          ++out.dropped_degenerate;
          continue;
        }
        out.segments.push_back({static_cast<Id>(out.segments.size()), std::move(ls), kind, tunnel});
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("feature " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  return out;
}

SegmentLoad load_segments(const fs::path& path) { return parse_segments(read_file(path)); }

std::vector<LabeledPolygon> load_labeled_polygons(const fs::path& path, const std::string& property) {
  const json doc = parse_collection(read_file(path));
  std::vector<LabeledPolygon> out;
  std::size_t index = 0;
  for (const auto& feat : doc["features"]) {
    try {
      LabeledPolygon lp;
      lp.label = feat.at("properties").at(property).get<std::string>();
      for (const auto& rings : polygons_from_geometry(feat.at("geometry"))) {
        for (auto& part : make_valid(std::span<const Ring>(rings))) lp.shape.push_back(std::move(part));
      }
      out.push_back(std::move(lp));
    } catch (const std::exception& e) {
      throw Error("feature " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  return out;
}

std::string footprints_to_geojson(const std::vector<Footprint>& fps) {
  json features = json::array();
  for (const auto& f : fps) {
    features.push_back({{"type", "Feature"},
                        {"properties", {{"id", f.id}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", polygon_to_json(f.shape)}}}});
  }
  return feature_collection(std::move(features)).dump();
}

std::string segments_to_geojson(const std::vector<Segment>& segs) {
  json features = json::array();
  for (const auto& s : segs) {
    json coords = json::array();
    for (const auto& p : s.points) coords.push_back({p.x(), p.y()});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"id", s.id}, {"kind", s.kind}, {"tunnel", s.tunnel}}},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
  }
  return feature_collection(std::move(features)).dump();
}

std::string cells_to_geojson(const std::vector<TessCell>& cells,
                             const std::map<std::string, std::vector<std::int64_t>>& extra) {
  json features = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    json coords = json::array();
    for (const auto& p : c.shape) coords.push_back(polygon_to_json(p));
    json props = {{"id", c.id},
                  {"enclosure_id", c.enclosure_id},
                  {"segment_id", c.segment_id},
                  {"node_id", c.node_id}};
    for (const auto& [name, values] : extra) props[name] = values.at(i);
    features.push_back({{"type", "Feature"},
                        {"properties", std::move(props)},
                        {"geometry", {{"type", "MultiPolygon"}, {"coordinates", coords}}}});
  }
  return feature_collection(std::move(features)).dump();
}

std::vector<TessCell> parse_cells(std::string_view geojson) {
  const json doc = parse_collection(geojson);
  std::vector<TessCell> out;
  for (const auto& feat : doc["features"]) {
    TessCell c;
    const auto& props = feat.at("properties");
    c.id = props.at("id").get<Id>();
    c.enclosure_id = props.at("enclosure_id").get<Id>();
    c.segment_id = props.at("segment_id").get<std::int64_t>();
    c.node_id = props.at("node_id").get<std::int64_t>();
    for (const auto& rings : polygons_from_geometry(feat.at("geometry"))) {
      Polygon p;
      p.outer() = rings[0];
      for (std::size_t i = 1; i < rings.size(); ++i) p.inners().push_back(rings[i]);
      c.shape.push_back(std::move(p));
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string format_number(double v) {
  if (is_missing(v)) return {};
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string table_to_csv(const FeatureTable& t) {
  if (t.rows() == 0) throw Error("refusing to write an empty table");
  std::vector<std::size_t> order(t.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t.ids()[a] < t.ids()[b]; });
  std::string out = "id";
  for (const auto& c : t.columns()) out += "," + c;
  out += "\n";
  for (auto r : order) {
    out += std::to_string(t.ids()[r]);
    for (std::size_t c = 0; c < t.cols(); ++c) {
      out += ",";
      out += format_number(t.at(r, c));
    }
    out += "\n";
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else {
      field += ch;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

FeatureTable table_from_csv(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "id") throw Error("table CSV must start with an id column");
  std::vector<std::string> cols(rows[0].begin() + 1, rows[0].end());
  std::vector<Id> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) ids.push_back(static_cast<Id>(std::stoul(rows[r].at(0))));
  FeatureTable t(ids, cols);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != cols.size() + 1) throw Error("ragged CSV row " + std::to_string(r));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string& f = rows[r][c + 1];
      if (f.empty()) continue;
      double v = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc{}) throw Error("bad number '" + f + "'");
      t.at(r - 1, c) = v;
    }
  }
  return t;
}

void write_table(const FeatureTable& t, const fs::path& path) { write_file_atomic(path, table_to_csv(t)); }

FeatureTable read_table(const fs::path& path) { return table_from_csv(read_file(path)); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace himoc::io
