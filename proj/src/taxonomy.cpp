#include "himoc/taxonomy.hpp"

#include "himoc/io.hpp"
#include "himoc/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace himoc {

namespace {

double median_of(std::vector<double> v) {
  std::erase_if(v, [](double x) { return is_missing(x); });
  if (v.empty()) return kMissing;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::size_t find_column(const std::vector<std::string>& columns, const std::string& name) {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error("missing column " + name);
  return static_cast<std::size_t>(it - columns.begin());
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

// indices of the k nearest rows of z to q, by (distance, index)
std::vector<std::size_t> nearest(const Matrix& z, std::span<const double> q, std::size_t k, std::size_t skip) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(z.rows);
  for (std::size_t j = 0; j < z.rows; ++j) {
    if (j != skip) d.emplace_back(sq_dist(q, z.row(j)), j);
  }
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

struct Dsu {
  std::vector<std::size_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  }
};

}  // namespace

std::vector<MorphotopeProfile> profile_groups(const std::vector<std::vector<std::size_t>>& groups,
                                              const std::vector<int>& ids, const FeatureTable& t,
                                              const std::vector<MorphotopeExtras>& extras, unsigned workers) {
  if (ids.size() != groups.size() || extras.size() != groups.size()) {
    throw Error("profile_groups: groups, ids and extras differ in length");
  }
  std::vector<MorphotopeProfile> out(groups.size());
  parallel_for(groups.size(), workers, [&](std::size_t i) {
    auto& p = out[i];
    p.id = ids[i];
    p.extras = extras[i];
    p.member_count = groups[i].size();
    p.medians.resize(t.cols());
    std::vector<double> vals(groups[i].size());
    for (std::size_t c = 0; c < t.cols(); ++c) {
      for (std::size_t k = 0; k < groups[i].size(); ++k) vals[k] = t.at(groups[i][k], c);
      p.medians[c] = median_of(vals);
    }
  });
  return out;
}

std::vector<std::vector<std::size_t>> label_groups(const std::vector<int>& labels) {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kNoise) groups[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return groups;
}

std::vector<MorphotopeProfile> profile_morphotopes(const std::vector<int>& labels, const FeatureTable& t,
                                                   const std::vector<MorphotopeExtras>& extras, unsigned workers) {
  const auto groups = label_groups(labels);
  std::vector<int> ids(groups.size());
  std::iota(ids.begin(), ids.end(), 0);
  return profile_groups(groups, ids, t, extras, workers);
}

std::vector<std::vector<std::size_t>> noise_groups(const std::vector<int>& labels, const ContiguityGraph& g) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<char> seen(labels.size(), 0);
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (labels[s] != kNoise || seen[s]) continue;
    std::vector<std::size_t> comp, stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (auto w : g.neighbors(v)) {
        if (labels[w] == kNoise && !seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

bool is_outlier(const MorphotopeProfile& p, const std::vector<std::string>& columns, const TaxonomyConfig& cfg) {
  const double area = p.medians.at(find_column(columns, "eq01_area_blg"));
  const double perim = p.medians.at(find_column(columns, "eq02_peri_blg"));
  return p.extras.perim_top10 > cfg.perim_top10_max || p.extras.area_top10 > cfg.area_top10_max ||
         area < cfg.min_median_area || perim > cfg.max_median_perimeter;
}

OutlierSplit exclude_outliers(const std::vector<MorphotopeProfile>& profiles, const std::vector<std::string>& columns,
                              const TaxonomyConfig& cfg) {
  OutlierSplit s;
  for (const auto& p : profiles) (is_outlier(p, columns, cfg) ? s.demoted : s.kept).push_back(p);
  return s;
}

std::vector<double> clustering_features(const MorphotopeProfile& p) {
  auto f = p.medians;
  f.push_back(static_cast<double>(p.extras.likely_occupied));
  f.push_back(p.extras.area_top10);
  return f;
}

std::vector<std::string> clustering_feature_names(const std::vector<std::string>& columns) {
  auto f = columns;
  f.emplace_back("likely_occupied");
  f.emplace_back("area_top10");
  return f;
}

Matrix Standardizer::apply(const std::vector<MorphotopeProfile>& profiles) const {
  Matrix z(profiles.size(), mean.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto f = clustering_features(profiles[i]);
    if (f.size() != mean.size()) throw Error("standardize: feature count differs from fitted");
    for (std::size_t k = 0; k < f.size(); ++k) z(i, k) = sd[k] > 0.0 ? (f[k] - mean[k]) / sd[k] : 0.0;
  }
  return z;
}

Standardizer fit_standardizer(const std::vector<MorphotopeProfile>& profiles) {
  Standardizer st;
  if (profiles.empty()) return st;
  const std::size_t dim = clustering_features(profiles.front()).size();
  st.mean.assign(dim, 0.0);
  st.sd.assign(dim, 0.0);
  std::vector<std::vector<double>> rows;
  rows.reserve(profiles.size());
  for (const auto& p : profiles) rows.push_back(clustering_features(p));
  const double n = static_cast<double>(rows.size());
  for (std::size_t k = 0; k < dim; ++k) {
    double s = 0.0;
    for (const auto& r : rows) s += r[k];
    st.mean[k] = s / n;
    double v = 0.0;
    for (const auto& r : rows) v += (r[k] - st.mean[k]) * (r[k] - st.mean[k]);
    st.sd[k] = std::sqrt(v / n);
    // constant columns can leave rounding residue
    if (st.sd[k] <= 1e-12 * std::max(1.0, std::abs(st.mean[k]))) st.sd[k] = 0.0;
  }
  return st;
}

Matrix standardize(const std::vector<MorphotopeProfile>& profiles) { return fit_standardizer(profiles).apply(profiles); }

ContiguityGraph knn_graph(const Matrix& z, std::size_t k) {
  ContiguityGraph g(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) {
    for (auto j : nearest(z, z.row(i), k, i)) g.add_edge(i, j);
  }
  return g;
}

std::vector<int> TaxonomyTree::levels() const {
  const std::size_t n = node_count();
  std::vector<int> level(n, 0);
  // parents come after children, so a reverse sweep sees parents first
  for (std::size_t k = dendrogram.merges.size(); k-- > 0;) {
    const auto& m = dendrogram.merges[k];
    const int l = level[dendrogram.leaves + k] + 1;
    level[m.a] = l;
    level[m.b] = l;
  }
  return level;
}

TaxonomyTree build_taxonomy(const Matrix& z, const std::vector<int>& morphotope_ids, std::size_t knn,
                            unsigned workers) {
  if (morphotope_ids.size() != z.rows) throw Error("build_taxonomy: id count differs from row count");
  TaxonomyTree tree;
  tree.morphotope_ids = morphotope_ids;
  tree.dendrogram = constrained_ward(z, knn_graph(z, knn), workers);
  auto& d = tree.dendrogram;
  const std::size_t n = z.rows;
  if (n == 0) return tree;

  // roots of the forest with their centroids
  std::vector<char> has_parent(n + d.merges.size(), 0);
  for (const auto& m : d.merges) has_parent[m.a] = has_parent[m.b] = 1;
  std::vector<std::vector<double>> centroid(n + d.merges.size());
  std::vector<std::size_t> size(n + d.merges.size(), 1);
  for (std::size_t i = 0; i < n; ++i) centroid[i].assign(z.row(i).begin(), z.row(i).end());
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const auto& m = d.merges[k];
    const double fa = static_cast<double>(size[m.a]), fb = static_cast<double>(size[m.b]);
    auto& c = centroid[n + k];
    c.resize(z.cols);
    for (std::size_t j = 0; j < z.cols; ++j) c[j] = (fa * centroid[m.a][j] + fb * centroid[m.b][j]) / (fa + fb);
    size[n + k] = size[m.a] + size[m.b];
  }
  std::vector<std::size_t> roots;
  for (std::size_t v = 0; v < has_parent.size(); ++v) {
    if (!has_parent[v]) roots.push_back(v);
  }
  double top = 0.0;
  for (const auto& m : d.merges) top = std::max(top, m.height);
  while (roots.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < roots.size(); ++i) {
      for (std::size_t j = i + 1; j < roots.size(); ++j) {
        const double dd = sq_dist(centroid[roots[i]], centroid[roots[j]]);
        if (dd < best) {
          best = dd;
          bi = i;
          bj = j;
        }
      }
    }
    const auto a = roots[bi], b = roots[bj];
    const double fa = static_cast<double>(size[a]), fb = static_cast<double>(size[b]);
    const double h = std::max(top, std::sqrt(2.0 * fa * fb / (fa + fb) * best));
    top = h;
    const std::size_t c = n + d.merges.size();
    d.merges.push_back({std::min(a, b), std::max(a, b), h, size[a] + size[b]});
    centroid.emplace_back(z.cols);
    size.push_back(size[a] + size[b]);
    for (std::size_t j = 0; j < z.cols; ++j) centroid[c][j] = (fa * centroid[a][j] + fb * centroid[b][j]) / (fa + fb);
    roots.erase(roots.begin() + static_cast<std::ptrdiff_t>(bj));
    roots[bi] = c;
    ++tree.joins;
  }
  return tree;
}

FlatCut flat_cut(const TaxonomyTree& tree, std::size_t k) {
  const auto& d = tree.dendrogram;
  const std::size_t n = d.leaves;
  if (k < 1 || k > n) throw Error("flat_cut: K must lie in [1, " + std::to_string(n) + "]");
  const std::size_t base_roots = n - d.merges.size();
  if (k < base_roots) throw Error("flat_cut: tree has more than K roots");
  const std::size_t kept = d.merges.size() - (k - base_roots);
  Dsu dsu(n + kept);
  for (std::size_t m = 0; m < kept; ++m) {
    dsu.parent[d.merges[m].a] = n + m;
    dsu.parent[d.merges[m].b] = n + m;
  }
  FlatCut cut;
  cut.labels.assign(n, kNoise);
  std::map<std::size_t, int> label_of;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = dsu.find(i);
    auto [it, fresh] = label_of.emplace(r, static_cast<int>(cut.roots.size()));
    if (fresh) cut.roots.push_back(r);
    cut.labels[i] = it->second;
  }
  return cut;
}

std::vector<int> assign_noise(const std::vector<MorphotopeProfile>& noise, const Standardizer& st,
                              const Matrix& kept_z, const std::vector<int>& kept_branch, std::size_t nn, bool discard,
                              unsigned workers) {
  std::vector<int> out(noise.size(), kNoise);
  if (discard || noise.empty() || kept_z.rows == 0) return out;
  if (kept_branch.size() != kept_z.rows) throw Error("assign_noise: branch count differs from kept rows");
  const Matrix q = st.apply(noise);
  parallel_for(noise.size(), workers, [&](std::size_t i) {
    const auto nb = nearest(kept_z, q.row(i), nn, kept_z.rows);
    std::map<int, std::size_t> votes;
    for (auto j : nb) ++votes[kept_branch[j]];
    std::size_t best = 0, winners = 0;
    int label = kNoise;
    for (auto [b, v] : votes) {
      if (v > best) {
        best = v;
        winners = 1;
        label = b;
      } else if (v == best) {
        ++winners;
      }
    }
    out[i] = winners == 1 ? label : kept_branch[nb.front()];
  });
  return out;
}

std::string taxonomy_to_json(const TaxonomyTree& tree) {
  using nlohmann::json;
  const auto& d = tree.dendrogram;
  const auto level = tree.levels();
  std::vector<json> node(tree.node_count());
  auto decorate = [&](json& j, std::size_t id) {
    j["level"] = level[id];
    if (auto it = tree.names.find(id); it != tree.names.end()) j["name"] = it->second;
  };
  for (std::size_t i = 0; i < d.leaves; ++i) {
    node[i] = {{"node", i}, {"morphotope", tree.morphotope_ids.at(i)}, {"size", 1}};
    decorate(node[i], i);
  }
  std::vector<char> has_parent(node.size(), 0);
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const auto& m = d.merges[k];
    const auto id = d.leaves + k;
    json j = {{"node", id}, {"height", m.height}, {"size", m.size}};
    decorate(j, id);
    j["children"] = json::array({std::move(node[m.a]), std::move(node[m.b])});
    node[id] = std::move(j);
    has_parent[m.a] = has_parent[m.b] = 1;
  }
  json roots = json::array();
  for (std::size_t v = 0; v < node.size(); ++v) {
    if (!has_parent[v]) roots.push_back(std::move(node[v]));
  }
  json out = roots.size() == 1 ? std::move(roots[0]) : json{{"roots", std::move(roots)}};
  return out.dump(1) + "\n";
}

std::string cut_to_csv(const TaxonomyTree& tree, const FlatCut& cut) {
  std::ostringstream os;
  os << "morphotope_id,branch\n";
  for (std::size_t i = 0; i < cut.labels.size(); ++i) os << tree.morphotope_ids.at(i) << ',' << cut.labels[i] << '\n';
  return os.str();
}

std::map<std::size_t, std::string> parse_branch_names(std::string_view text) {
  std::map<std::size_t, std::string> out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("branch names: ") + e.what());
  }
  if (!j.is_object()) throw Error("branch names: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::size_t id = 0;
    try {
      std::size_t used = 0;
      id = std::stoul(it.key(), &used);
      if (used != it.key().size()) throw std::invalid_argument(it.key());
    } catch (const std::exception&) {
      throw Error("branch names: key is not a node id: " + it.key());
    }
    if (!it->is_string()) throw Error("branch names: value for " + it.key() + " is not a string");
    out[id] = it->get<std::string>();
  }
  return out;
}

std::string branch_names_to_json(const std::map<std::size_t, std::string>& names) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, name] : names) j[std::to_string(id)] = name;
  return j.dump(1) + "\n";
}

}  // namespace himoc
