#pragma once

#include "himoc/model.hpp"

#include <span>
#include <vector>

namespace himoc {

struct TessellationConfig {
  double segment_step = 0.5;        // footprint boundary densification (m)
  double shrink = 0.4;              // footprints are inset by this before seeding
  double default_bandwidth = 100.0; // isolated buildings; also outer-region padding
  double min_bandwidth = 0.5;
  double bandwidth_factor = 1.1;    // radius = factor * farthest neighbour distance
  double contiguity_tol = 1e-6;     // queen contiguity distance
  double node_snap = 1e-3;          // street endpoints closer than this share a node
  unsigned workers = 1;
};

struct Enclosure {
  Id id = 0;
  MultiPolygon shape;
  bool outer = false;  // part of the padded complement of all street faces
};

/// Street network as a multigraph: nodes at segment endpoints, one edge per
/// segment.
struct StreetGraph {
  std::vector<NetNode> nodes;
  std::vector<std::pair<Id, Id>> ends;  // per segment: (start node, end node)
  std::vector<double> lengths;          // per segment
  std::vector<std::vector<std::pair<Id, Id>>> adj;  // node -> (segment, other node)

  std::size_t node_count() const { return nodes.size(); }
  std::size_t segment_count() const { return ends.size(); }
};

/// Splits segments at junctions and crossings; parts inherit kind/tunnel and
/// receive dense fresh ids.
std::vector<Segment> node_street_segments(std::span<const Segment> segs);

StreetGraph build_street_graph(std::span<const Segment> segs, double snap = 1e-3);

/// Faces of the noded street arrangement plus the padded outer complement.
/// Bounded faces come first, ordered by position; outer parts follow.
std::vector<Enclosure> build_enclosures(std::span<const Segment> segs, const Box& extent, double pad);

struct EnclosureAssignment {
  std::vector<Id> enclosure_of;  // per building
  std::size_t outside = 0;       // buildings assigned to an outer part
};
/// Each building goes to the enclosure holding the largest share of it.
EnclosureAssignment assign_enclosures(std::span<const Footprint> blds, std::span<const Enclosure> encl);

/// Unclipped polygon-seeded Voronoi regions (within each enclosure) and the
/// building neighbour graph they induce.
struct VoronoiRegions {
  std::vector<MultiPolygon> regions;  // per building
  ContiguityGraph neighbors;
};
VoronoiRegions voronoi_regions(std::span<const Footprint> blds, std::span<const Enclosure> encl,
                               std::span<const Id> enclosure_of, const TessellationConfig& cfg);

/// Per-building radius: factor x farthest neighbour footprint distance.
std::vector<double> compute_bandwidth(std::span<const Footprint> blds, const ContiguityGraph& neighbors,
                                      const TessellationConfig& cfg);

struct TessellationResult {
  std::vector<TessCell> cells;
  std::size_t empty_fallbacks = 0;
};
/// Regions clipped to each building's bandwidth buffer; every cell covers
/// its own footprint and excludes the others.
TessellationResult tessellate(std::span<const Footprint> blds, std::span<const Enclosure> encl,
                              std::span<const Id> enclosure_of, const VoronoiRegions& vr,
                              std::span<const double> bandwidth, const TessellationConfig& cfg);

/// Queen contiguity between cells (shared boundary point within tolerance).
ContiguityGraph cell_contiguity(std::span<const TessCell> cells, double tol, unsigned workers = 1);

/// Nearest segment per footprint centroid, ties to the lower segment id.
std::vector<std::int64_t> nearest_segments(std::span<const Footprint> blds, std::span<const Segment> segs);

/// Fills segment_id/node_id of every cell (node: nearer endpoint of the
/// assigned segment) and returns queen contiguity.
ContiguityGraph cell_graphs(std::vector<TessCell>& cells, std::span<const Footprint> blds,
                            std::span<const Segment> segs, const StreetGraph& graph,
                            const TessellationConfig& cfg);

/// Full two-phase run: enclosures, first pass, bandwidth, clipped cells,
/// contiguity and street assignment.
struct EnclosedTessellation {
  std::vector<Enclosure> enclosures;
  EnclosureAssignment assignment;
  std::vector<double> bandwidth;
  ContiguityGraph first_pass_neighbors;
  std::vector<TessCell> cells;
  ContiguityGraph contiguity;
  std::size_t empty_fallbacks = 0;
};
EnclosedTessellation enclosed_tessellation(std::span<const Footprint> blds, std::span<const Segment> segs,
                                           const StreetGraph& graph, const TessellationConfig& cfg);

}  // namespace himoc
