#pragma once

#include "himoc/model.hpp"
#include "himoc/tessellation.hpp"

#include <span>
#include <string>
#include <vector>

namespace himoc {

enum class Element { building, cell, segment, node };
enum class Scale { small, medium, large };

struct CharacterSpec {
  std::string name;  // column name, e.g. "eq01_area_blg"
  Element element;
  Scale scale;
  int equation;  // 1..59
};

/// The 59 characters in column order.
const std::vector<CharacterSpec>& character_specs();
std::vector<std::string> character_names();

struct MorphConfig {
  double profile_step = 3.0;     // street section spacing (m)
  double profile_cap = 50.0;     // per-side section length (m)
  double corner_angle = 170.0;   // vertices at or below this angle are corners (deg)
  double adjacency_tol = 0.5;    // buildings this close are joined
  int reach_order = 3;           // medium/large topological reach
  int ego_radius = 5;            // street subgraph radius
  bool metric_closeness = true;  // segment lengths as closeness weights
  unsigned workers = 1;
};

/// Rtree over footprint envelopes.
class FootprintIndex {
 public:
  explicit FootprintIndex(std::span<const Footprint> blds);
  ~FootprintIndex();
  FootprintIndex(const FootprintIndex&) = delete;
  FootprintIndex& operator=(const FootprintIndex&) = delete;

  std::vector<std::size_t> query(const Box& box) const;
  std::span<const Footprint> footprints() const { return blds_; }

 private:
  struct Tree;
  std::span<const Footprint> blds_;
  Tree* tree_;
};

struct BuildingShape {
  double area = 0, perimeter = 0, courtyard_area = 0, circular_compactness = 0;
  double corners = 0, squareness = kMissing, eri = 0, elongation = 0;
};
BuildingShape building_shape_chars(const Polygon& b, double corner_angle = 170.0);

struct CellShape {
  double longest_axis = 0, area = 0, circular_compactness = 0, eri = 0, coverage = 0;
};
CellShape cell_chars(const MultiPolygon& cell, const Polygon& bld);

/// Endpoint distance over length.
double linearity(const Linestring& line);

struct StreetProfile {
  double width = 0, openness = 0, width_dev = 0;
  std::size_t sections = 0;
};
StreetProfile street_profile(const Linestring& line, const FootprintIndex& blds, double step = 3.0,
                             double cap = 50.0);

/// Per-segment and per-node street characters.
struct NetworkChars {
  // per segment
  std::vector<double> seg_length, seg_linearity, seg_area, seg_bpm, seg_reach_area, seg_mean_length,
      seg_reach_cells;
  std::vector<StreetProfile> seg_profile;
  // per node
  std::vector<double> node_area, node_degree, node_mean_dist, node_reach_cells1, node_reach_area1,
      node_meshedness, node_cds_length, node_density, node_reach_cells3, node_reach_area3, node_p_cds,
      node_p3w, node_p4w, node_weighted_density, node_closeness, node_square_clustering, node_bld_area_dev;
};
NetworkChars network_chars(const StreetGraph& graph, std::span<const Segment> segs, std::span<const TessCell> cells,
                           std::span<const Footprint> blds, const FootprintIndex& index, const MorphConfig& cfg);

/// Lind et al. square clustering over the simple projection of the graph.
std::vector<double> square_clustering(const StreetGraph& graph);

/// Segments sharing a node with each segment (line graph, no self entries).
std::vector<std::vector<std::size_t>> segment_adjacency(const StreetGraph& graph);

/// Nodes within `radius` hops of `v`, including `v`, sorted.
std::vector<std::size_t> node_neighborhood(const StreetGraph& graph, std::size_t v, int radius);

struct EgoStats {
  std::size_t nodes = 0, edges = 0;
  double length = 0, meshedness = 0, density = 0, p_cds = 0, p3w = 0, p4w = 0, weighted_density = 0,
         closeness = 0;
};
EgoStats ego_stats(const StreetGraph& graph, std::size_t v, int radius, bool metric = true);

/// Dissolved adjacency component (closing by half the tolerance).
struct JoinedStructure {
  std::vector<std::size_t> members;
  MultiPolygon shape;
  double member_area = 0;
};
std::vector<JoinedStructure> joined_structures(std::span<const Footprint> blds, const ContiguityGraph& bld_adj,
                                               double adjacency_tol, unsigned workers = 1);

/// Per-building characters from adjacency and neighbourhoods.
struct BuildingContext {
  std::vector<double> shared_walls, neighbor_dist, courtyards, outer_wall, inter_bld_dist, adjacency, joined_count,
      joined_area, joined_perimeter, joined_elongation, joined_eri, joined_cco, joined_lal, joined_facade,
      joined_square_compactness;
  // per cell
  std::vector<double> weighted_neighbors, neighbor_area, reached_blocks, neighbor_area_dev;
};
BuildingContext context_chars(std::span<const Footprint> blds, std::span<const TessCell> cells,
                              const ContiguityGraph& cell_graph, const ContiguityGraph& bld_adj,
                              const std::vector<JoinedStructure>& joined, const MorphConfig& cfg);

struct MorphologyInput {
  std::span<const Footprint> blds;
  std::span<const TessCell> cells;  // parallel to blds
  std::span<const Segment> segs;
  const StreetGraph* graph = nullptr;
  const ContiguityGraph* cell_graph = nullptr;
  const ContiguityGraph* bld_adj = nullptr;
};

/// All 59 characters per cell; values that cannot be measured stay missing.
FeatureTable measure_characters(const MorphologyInput& in, const MorphConfig& cfg);

/// Fills missing entries with the enclosure median, then the global median,
/// then 0 for columns with no observed value. Returns the number filled.
std::size_t impute_missing(FeatureTable& t, std::span<const Id> enclosure_of);

FeatureTable assemble_feature_table(const MorphologyInput& in, const MorphConfig& cfg);

struct MorphotopeExtras {
  int likely_occupied = 0;
  double area_top10 = 0;
  double perim_top10 = 0;
};
/// `members` index `blds`; adjacency components are restricted to members.
MorphotopeExtras morphotope_extras(std::span<const std::size_t> members, std::span<const Footprint> blds,
                                   const ContiguityGraph& bld_adj, double adjacency_tol);

}  // namespace himoc
