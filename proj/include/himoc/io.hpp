#pragma once

#include "himoc/model.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace himoc::io {

namespace fs = std::filesystem;

struct SegmentLoad {
  std::vector<Segment> segments;
  std::size_t dropped_degenerate = 0;  // zero-length parts
  std::size_t missing_kind = 0;        // defaulted to "unclassified"
};

/// Polygon/MultiPolygon FeatureCollection -> validated, exploded footprints
/// with dense ids in input order.
std::vector<Footprint> parse_footprints(std::string_view geojson);
std::vector<Footprint> load_footprints(const fs::path& path);

SegmentLoad parse_segments(std::string_view geojson);
SegmentLoad load_segments(const fs::path& path);

struct LabeledPolygon {
  MultiPolygon shape;
  std::string label;
};
/// Areal features carrying a string class in `property`.
std::vector<LabeledPolygon> load_labeled_polygons(const fs::path& path, const std::string& property);

std::string footprints_to_geojson(const std::vector<Footprint>& fps);
std::string segments_to_geojson(const std::vector<Segment>& segs);
/// Cells with id, enclosure_id, segment_id, node_id (+ optional extra
/// integer properties, keyed by name, one value per cell).
std::string cells_to_geojson(const std::vector<TessCell>& cells,
                             const std::map<std::string, std::vector<std::int64_t>>& extra = {});
std::vector<TessCell> parse_cells(std::string_view geojson);

/// Shortest decimal that round-trips to the same double.
std::string format_number(double v);

std::string table_to_csv(const FeatureTable& t);
FeatureTable table_from_csv(std::string_view csv);
void write_table(const FeatureTable& t, const fs::path& path);
FeatureTable read_table(const fs::path& path);

std::string read_file(const fs::path& path);
/// Writes through a temporary sibling and renames over `path`.
void write_file_atomic(const fs::path& path, std::string_view content);

std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace himoc::io
