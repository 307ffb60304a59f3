#pragma once

#include "himoc/model.hpp"

#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace himoc {

struct PreprocessConfig {
  double simplify_tol = 0.1;
  double max_building_area = 200'000.0;
  double merge_overlap_frac = 0.10;
  double merge_small_area = 50.0;
  double adjacency_tol = 0.5;
  double gap_area = 0.001;  // holes below this area (m^2) are filled
  double snap_tol = 0.01;   // vertex snapping distance between buildings
  bool assume_simplified = true;  // street network arrives pre-simplified
};

struct PreprocessReport {
  std::size_t merged_pairs = 0;
  std::size_t dropped_large = 0;
  std::size_t filtered_segments = 0;
  std::size_t snapped_gaps = 0;
};

/// Street kinds retained for analysis.
const std::set<std::string>& street_kind_whitelist();

/// True when two footprints overlap and either overlap share or the
/// small-building clause demands a merge.
bool should_merge(const Polygon& a, const Polygon& b, const PreprocessConfig& cfg);

/// Simplify, drop oversized, merge overlapping, snap and fill gaps. Output
/// ids are dense, ordered by the smallest input id of each result.
std::pair<std::vector<Footprint>, PreprocessReport> preprocess_buildings(std::vector<Footprint> raw,
                                                                         const PreprocessConfig& cfg);

std::pair<std::vector<Segment>, PreprocessReport> filter_segments(std::vector<Segment> raw);

/// Edge iff the footprints are within `tol` of each other.
ContiguityGraph building_adjacency(std::span<const Footprint> blds, double tol);

}  // namespace himoc
