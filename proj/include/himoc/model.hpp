#pragma once

#include "himoc/geometry.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace himoc {

using Id = std::uint32_t;

/// Recoverable input or configuration problem.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit missing-value marker; never confused with a real zero.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

struct Footprint {
  Id id = 0;
  Polygon shape;
};

struct Segment {
  Id id = 0;
  Linestring points;
  std::string kind = "unclassified";
  bool tunnel = false;
};

struct NetNode {
  Id id = 0;
  Point position;
  std::vector<Id> incident;  // segment ids; a loop segment appears twice
  std::size_t degree() const { return incident.size(); }
};

struct TessCell {
  Id id = 0;  // equals the footprint id
  MultiPolygon shape;
  Id enclosure_id = 0;
  std::int64_t segment_id = -1;  // -1: no street available
  std::int64_t node_id = -1;
};

/// Undirected simple graph over dense node indices.
class ContiguityGraph {
 public:
  ContiguityGraph() = default;
  explicit ContiguityGraph(std::size_t n) : adj_(n) {}

  std::size_t size() const { return adj_.size(); }
  void add_edge(std::size_t a, std::size_t b);
  bool has_edge(std::size_t a, std::size_t b) const;
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return adj_[v]; }
  std::size_t degree(std::size_t v) const { return adj_[v].size(); }
  std::size_t edge_count() const;
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  /// Component index per node, numbered by smallest member.
  std::vector<std::size_t> components() const;
  /// Nodes within `order` hops of `v`, including `v`.
  std::vector<std::size_t> neighborhood(std::size_t v, int order) const;

 private:
  std::vector<std::vector<std::size_t>> adj_;  // sorted
};

/// Column-major table of real-valued characters keyed by row id.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::vector<Id> row_ids, std::vector<std::string> columns);

  std::size_t rows() const { return ids_.size(); }
  std::size_t cols() const { return names_.size(); }
  const std::vector<Id>& ids() const { return ids_; }
  const std::vector<std::string>& columns() const { return names_; }
  std::size_t column_index(const std::string& name) const;

  double& at(std::size_t row, std::size_t col) { return data_[col][row]; }
  double at(std::size_t row, std::size_t col) const { return data_[col][row]; }
  std::vector<double>& column(std::size_t col) { return data_[col]; }
  const std::vector<double>& column(std::size_t col) const { return data_[col]; }

  std::size_t missing_count() const;

 private:
  std::vector<Id> ids_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> data_;
};

/// Dense row-major matrix used as clustering input.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  static Matrix from_table(const FeatureTable& t);
};

}  // namespace himoc
