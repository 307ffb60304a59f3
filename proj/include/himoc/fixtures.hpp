#pragma once

#include "himoc/model.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace himoc::fixtures {

enum class Pattern { detached_grid, terrace_row, perimeter_block, industrial_halls };

std::string pattern_name(Pattern p);
Pattern parse_pattern(std::string_view name);

/// One patterned block laid out in slots of pitch_x by pitch_y from `origin`.
/// Detached houses and halls take one slot each. A terrace slot is one row of
/// `per_row` touching houses of the given width. A perimeter slot is a ring
/// of houses around a courtyard; `count` must fill whole rings.
struct BlockSpec {
  Pattern pattern = Pattern::detached_grid;
  Point origin{0, 0};
  double pitch_x = 20, pitch_y = 25;
  double width = 10, depth = 12;
  std::size_t count = 100;
  std::size_t per_row = 0;  // 0: square-ish layout
};

struct SceneSpec {
  std::uint64_t seed = 1;
  double jitter = 0.5;  // position and size noise (m)
  std::vector<BlockSpec> blocks;
};

struct Scene {
  std::vector<Footprint> footprints;
  std::vector<Segment> segments;
  std::vector<int> labels;    // generating block per footprint
  std::vector<Box> extents;   // per block
  std::vector<Pattern> patterns;  // per block
};

/// Throws Error when block extents overlap or a block cannot hold its
/// buildings with 1 m clearance.
Scene generate(const SceneSpec& spec);

/// Houses of two sizes in adjacent blocks sharing an edge, 8 per row.
SceneSpec two_pattern_spec(std::uint64_t seed = 1, std::size_t rows = 12);
/// All four archetypes in a 2x2 arrangement.
SceneSpec four_pattern_spec(std::uint64_t seed = 1);

std::string spec_to_json(const SceneSpec& spec);
SceneSpec spec_from_json(std::string_view json);
/// building_id,block,pattern
std::string labels_to_csv(const Scene& scene);

/// Adjusted Rand Index between two labelings of the same items.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace himoc::fixtures
