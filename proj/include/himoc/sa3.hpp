#pragma once

#include "himoc/model.hpp"

#include <string>
#include <vector>

namespace himoc {

inline constexpr int kNoise = -1;

struct Merge {
  std::size_t a = 0, b = 0;  // child ids, a < b; leaves 0..n-1, internal n..
  double height = 0.0;       // sqrt(2 * Ward increase)
  std::size_t size = 0;
};

/// Merge records in agglomeration order; one tree per contiguity component.
struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<Merge> merges;

  /// Merges whose height is below the preceding one.
  std::size_t inversions() const;
};

/// Column-wise (average rank - 1) / (n - 1); constant columns become 0.5.
FeatureTable quantile_transform(const FeatureTable& t);

/// Exact contiguity-constrained Ward agglomeration. Components run on
/// `workers` threads; the interleaved result equals a single global run.
Dendrogram constrained_ward(const Matrix& x, const ContiguityGraph& g, unsigned workers = 1);

/// Bottom-up sweep in merge order: clusters reaching `min_size` are marked,
/// a merge of two marked clusters emits both. Labels are numbered by the
/// smallest member; unmarked points are kNoise.
std::vector<int> leaf_extract(const Dendrogram& d, std::size_t min_size);

struct Sa3Result {
  std::vector<int> labels;  // per table row
  Dendrogram dendrogram;
  std::size_t clusters = 0;
  std::size_t noise = 0;
};

/// quantile_transform -> constrained_ward -> leaf_extract. Throws if any
/// cluster is smaller than min_size or not contiguous.
Sa3Result sa3(const FeatureTable& t, const ContiguityGraph& g, std::size_t min_size = 75, unsigned workers = 1);

/// Throws Error naming the first label that is undersized or disconnected.
void check_morphotopes(const std::vector<int>& labels, const ContiguityGraph& g, std::size_t min_size);

std::string dendrogram_to_csv(const Dendrogram& d);
std::string labels_to_csv(const std::vector<Id>& ids, const std::vector<int>& labels);

}  // namespace himoc
