#pragma once

#include "himoc/model.hpp"
#include "himoc/morphometrics.hpp"
#include "himoc/sa3.hpp"

#include <map>
#include <string>
#include <vector>

namespace himoc {

struct MorphotopeProfile {
  int id = 0;                   // morphotope label, or pseudo-morphotope index
  std::vector<double> medians;  // one per table column
  MorphotopeExtras extras;
  std::size_t member_count = 0;
};

struct TaxonomyConfig {
  double perim_top10_max = 200000.0;
  double area_top10_max = 500000.0;  // literal reading would be 500
  double min_median_area = 20.0;
  double max_median_perimeter = 5000.0;
  std::size_t knn = 10;
  std::size_t noise_nn = 5;
  bool discard_noise = false;
};

/// Column-wise medians over the rows of each group. `extras[i]` belongs to
/// `groups[i]`; `ids[i]` becomes the profile id.
std::vector<MorphotopeProfile> profile_groups(const std::vector<std::vector<std::size_t>>& groups,
                                              const std::vector<int>& ids, const FeatureTable& t,
                                              const std::vector<MorphotopeExtras>& extras, unsigned workers = 1);

/// Row indices per label, labels 0..max; kNoise rows are skipped.
std::vector<std::vector<std::size_t>> label_groups(const std::vector<int>& labels);

/// One profile per label; `extras` is indexed by label.
std::vector<MorphotopeProfile> profile_morphotopes(const std::vector<int>& labels, const FeatureTable& t,
                                                   const std::vector<MorphotopeExtras>& extras,
                                                   unsigned workers = 1);

/// Connected components of the noise rows, ordered by smallest row.
std::vector<std::vector<std::size_t>> noise_groups(const std::vector<int>& labels, const ContiguityGraph& g);

struct OutlierSplit {
  std::vector<MorphotopeProfile> kept;
  std::vector<MorphotopeProfile> demoted;
};

/// Needs the eq01_area_blg and eq02_peri_blg columns of `columns`.
bool is_outlier(const MorphotopeProfile& p, const std::vector<std::string>& columns, const TaxonomyConfig& cfg);
OutlierSplit exclude_outliers(const std::vector<MorphotopeProfile>& profiles, const std::vector<std::string>& columns,
                              const TaxonomyConfig& cfg = {});

/// medians followed by likely_occupied and area_top10
std::vector<double> clustering_features(const MorphotopeProfile& p);
std::vector<std::string> clustering_feature_names(const std::vector<std::string>& columns);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;  // population
  Matrix apply(const std::vector<MorphotopeProfile>& profiles) const;
};

Standardizer fit_standardizer(const std::vector<MorphotopeProfile>& profiles);

/// z-scores of clustering_features over `profiles`; constant columns are 0.
Matrix standardize(const std::vector<MorphotopeProfile>& profiles);

/// Union-symmetrised k-nearest-neighbour graph; ties broken by row index.
ContiguityGraph knn_graph(const Matrix& z, std::size_t k);

struct TaxonomyTree {
  Dendrogram dendrogram;            // leaves are rows of the standardised matrix
  std::vector<int> morphotope_ids;  // per leaf
  std::size_t joins = 0;            // top merges joining kNN components
  std::map<std::size_t, std::string> names;  // node id -> branch name

  std::size_t node_count() const { return dendrogram.leaves + dendrogram.merges.size(); }
  /// Merges on the path from the root; the root has level 0.
  std::vector<int> levels() const;
};

/// Ward restricted to the kNN graph. Disconnected components are joined at
/// the top, nearest centroids first.
TaxonomyTree build_taxonomy(const Matrix& z, const std::vector<int>& morphotope_ids, std::size_t knn = 10,
                            unsigned workers = 1);

struct FlatCut {
  std::vector<int> labels;         // per leaf, numbered by smallest leaf
  std::vector<std::size_t> roots;  // tree node of each branch
};

/// Exactly K branches: the K-1 last merges are undone.
FlatCut flat_cut(const TaxonomyTree& tree, std::size_t k);

/// Branch per noise profile: majority among its `nn` nearest kept profiles
/// (rows of `kept_z`), ties resolved by the single nearest. kNoise for all
/// when discarding.
std::vector<int> assign_noise(const std::vector<MorphotopeProfile>& noise, const Standardizer& st,
                              const Matrix& kept_z, const std::vector<int>& kept_branch, std::size_t nn = 5,
                              bool discard = false, unsigned workers = 1);

std::string taxonomy_to_json(const TaxonomyTree& tree);
std::string cut_to_csv(const TaxonomyTree& tree, const FlatCut& cut);
/// JSON object {"<node id>": "name", ...}.
std::map<std::size_t, std::string> parse_branch_names(std::string_view json);
std::string branch_names_to_json(const std::map<std::size_t, std::string>& names);

}  // namespace himoc
