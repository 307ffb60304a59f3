#pragma once

#include "himoc/io.hpp"
#include "himoc/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace himoc {

inline const std::string kUnmatched = "unmatched";

struct ConfusionMatrix {
  std::vector<int> branches;         // rows, ascending
  std::vector<std::string> classes;  // sorted, kUnmatched last when present
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::vector<double>> values;  // row-normalised counts
};

/// Each building takes the class of the first external polygon covering its
/// representative point.
ConfusionMatrix cross_tabulate(const std::vector<Footprint>& blds, const std::vector<int>& branch,
                               const std::vector<io::LabeledPolygon>& external, unsigned workers = 1);

std::string confusion_to_csv(const ConfusionMatrix& m);

struct GridSpec {
  double cell_size = 50000.0;
  std::optional<Point> origin;  // default: lower-left of the data bounds
};

struct GridCell {
  Box box;
  std::size_t total = 0;
  std::map<int, double> share;     // branch -> share of the cell's buildings
  std::map<int, double> relative;  // share / branch's largest share over cells
};

/// Non-empty cells ordered by row, then column.
std::vector<GridCell> grid_abundance(const std::vector<Footprint>& blds, const std::vector<int>& branch,
                                     const GridSpec& spec = {});

std::string grid_to_geojson(const std::vector<GridCell>& cells);

}  // namespace himoc
