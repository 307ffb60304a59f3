#include "himoc/pipeline.hpp"

#include "himoc/io.hpp"
#include "himoc/parallel.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace himoc {

using nlohmann::json;

// ---------------------------------------------------------------- hashing

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string sha256_file(const fs::path& p) { return sha256_hex(io::read_file(p)); }

// ---------------------------------------------------------------- config

namespace {

template <typename T>
void read_key(const json& obj, const char* key, T& into, std::set<std::string>& seen) {
  seen.insert(key);
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for ") + key);
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.contains(it.key())) throw ConfigError("config: unknown key " + where + it.key());
  }
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  if (!root.at(name).is_object()) throw ConfigError(std::string("config: ") + name + " must be an object");
  return root.at(name);
}

json preprocess_json(const PreprocessConfig& c) {
  return {{"simplify_tol", c.simplify_tol},         {"max_building_area", c.max_building_area},
          {"merge_overlap_frac", c.merge_overlap_frac}, {"merge_small_area", c.merge_small_area},
          {"adjacency_tol", c.adjacency_tol},       {"gap_area", c.gap_area},
          {"snap_tol", c.snap_tol},                 {"assume_simplified", c.assume_simplified}};
}

json tessellation_json(const TessellationConfig& c) {
  return {{"segment_step", c.segment_step},   {"shrink", c.shrink},
          {"default_bandwidth", c.default_bandwidth}, {"min_bandwidth", c.min_bandwidth},
          {"bandwidth_factor", c.bandwidth_factor},   {"contiguity_tol", c.contiguity_tol},
          {"node_snap", c.node_snap}};
}

json morphometrics_json(const MorphConfig& c) {
  return {{"profile_step", c.profile_step}, {"profile_cap", c.profile_cap},
          {"corner_angle", c.corner_angle}, {"adjacency_tol", c.adjacency_tol},
          {"reach_order", c.reach_order},   {"ego_radius", c.ego_radius},
          {"metric_closeness", c.metric_closeness}};
}

json taxonomy_json(const TaxonomyConfig& c) {
  return {{"perim_top10_max", c.perim_top10_max},         {"area_top10_max", c.area_top10_max},
          {"min_median_area", c.min_median_area},         {"max_median_perimeter", c.max_median_perimeter},
          {"knn", c.knn},                                 {"noise_nn", c.noise_nn},
          {"discard_noise", c.discard_noise}};
}

fs::path resolve(const std::string& p, const fs::path& base) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

PipelineConfig parse_config(std::string_view text, const fs::path& base) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: expected a JSON object");
  PipelineConfig c;
  std::set<std::string> top;
  std::string footprints, streets, external, names, out = "out";
  read_key(root, "footprints", footprints, top);
  read_key(root, "streets", streets, top);
  read_key(root, "external", external, top);
  read_key(root, "external_property", c.external_property, top);
  read_key(root, "branch_names", names, top);
  read_key(root, "out", out, top);
  read_key(root, "min_size", c.min_size, top);
  read_key(root, "k", c.k, top);
  read_key(root, "grid_cell", c.grid_cell, top);
  read_key(root, "workers", c.workers, top);
  for (const char* s : {"preprocess", "tessellation", "morphometrics", "taxonomy"}) top.insert(s);
  reject_unknown(root, top, "");
  c.footprints = resolve(footprints, base);
  c.streets = resolve(streets, base);
  c.external = resolve(external, base);
  c.branch_names = resolve(names, base);
  c.out = resolve(out, base);

  std::set<std::string> k;
  const auto& pre = section(root, "preprocess");
  read_key(pre, "simplify_tol", c.preprocess.simplify_tol, k);
  read_key(pre, "max_building_area", c.preprocess.max_building_area, k);
  read_key(pre, "merge_overlap_frac", c.preprocess.merge_overlap_frac, k);
  read_key(pre, "merge_small_area", c.preprocess.merge_small_area, k);
  read_key(pre, "adjacency_tol", c.preprocess.adjacency_tol, k);
  read_key(pre, "gap_area", c.preprocess.gap_area, k);
  read_key(pre, "snap_tol", c.preprocess.snap_tol, k);
  read_key(pre, "assume_simplified", c.preprocess.assume_simplified, k);
  reject_unknown(pre, k, "preprocess.");
  k.clear();
  const auto& tess = section(root, "tessellation");
  read_key(tess, "segment_step", c.tessellation.segment_step, k);
  read_key(tess, "shrink", c.tessellation.shrink, k);
  read_key(tess, "default_bandwidth", c.tessellation.default_bandwidth, k);
  read_key(tess, "min_bandwidth", c.tessellation.min_bandwidth, k);
  read_key(tess, "bandwidth_factor", c.tessellation.bandwidth_factor, k);
  read_key(tess, "contiguity_tol", c.tessellation.contiguity_tol, k);
  read_key(tess, "node_snap", c.tessellation.node_snap, k);
  reject_unknown(tess, k, "tessellation.");
  k.clear();
  const auto& morph = section(root, "morphometrics");
  read_key(morph, "profile_step", c.morphometrics.profile_step, k);
  read_key(morph, "profile_cap", c.morphometrics.profile_cap, k);
  read_key(morph, "corner_angle", c.morphometrics.corner_angle, k);
  read_key(morph, "adjacency_tol", c.morphometrics.adjacency_tol, k);
  read_key(morph, "reach_order", c.morphometrics.reach_order, k);
  read_key(morph, "ego_radius", c.morphometrics.ego_radius, k);
  read_key(morph, "metric_closeness", c.morphometrics.metric_closeness, k);
  reject_unknown(morph, k, "morphometrics.");
  k.clear();
  const auto& tax = section(root, "taxonomy");
  read_key(tax, "perim_top10_max", c.taxonomy.perim_top10_max, k);
  read_key(tax, "area_top10_max", c.taxonomy.area_top10_max, k);
  read_key(tax, "min_median_area", c.taxonomy.min_median_area, k);
  read_key(tax, "max_median_perimeter", c.taxonomy.max_median_perimeter, k);
  read_key(tax, "knn", c.taxonomy.knn, k);
  read_key(tax, "noise_nn", c.taxonomy.noise_nn, k);
  read_key(tax, "discard_noise", c.taxonomy.discard_noise, k);
  reject_unknown(tax, k, "taxonomy.");
  return c;
}

void validate(const PipelineConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0)) throw ConfigError(std::string("config: ") + name + " must not be negative");
  };
  if (c.min_size < 2) throw ConfigError("config: min_size must be at least 2");
  if (c.k < 1) throw ConfigError("config: k must be at least 1");
  if (c.workers < 1) throw ConfigError("config: workers must be at least 1");
  if (c.out.empty()) throw ConfigError("config: out must be set");
  positive(c.grid_cell, "grid_cell");
  non_negative(c.preprocess.simplify_tol, "preprocess.simplify_tol");
  positive(c.preprocess.max_building_area, "preprocess.max_building_area");
  positive(c.preprocess.merge_overlap_frac, "preprocess.merge_overlap_frac");
  non_negative(c.preprocess.merge_small_area, "preprocess.merge_small_area");
  positive(c.preprocess.adjacency_tol, "preprocess.adjacency_tol");
  non_negative(c.preprocess.gap_area, "preprocess.gap_area");
  non_negative(c.preprocess.snap_tol, "preprocess.snap_tol");
  positive(c.tessellation.segment_step, "tessellation.segment_step");
  non_negative(c.tessellation.shrink, "tessellation.shrink");
  positive(c.tessellation.default_bandwidth, "tessellation.default_bandwidth");
  positive(c.tessellation.min_bandwidth, "tessellation.min_bandwidth");
  positive(c.tessellation.bandwidth_factor, "tessellation.bandwidth_factor");
  positive(c.tessellation.contiguity_tol, "tessellation.contiguity_tol");
  positive(c.tessellation.node_snap, "tessellation.node_snap");
  positive(c.morphometrics.profile_step, "morphometrics.profile_step");
  positive(c.morphometrics.profile_cap, "morphometrics.profile_cap");
  positive(c.morphometrics.corner_angle, "morphometrics.corner_angle");
  positive(c.morphometrics.adjacency_tol, "morphometrics.adjacency_tol");
  if (c.morphometrics.reach_order < 1 || c.morphometrics.ego_radius < 1) {
    throw ConfigError("config: morphometrics reach_order and ego_radius must be at least 1");
  }
  positive(c.taxonomy.perim_top10_max, "taxonomy.perim_top10_max");
  positive(c.taxonomy.area_top10_max, "taxonomy.area_top10_max");
  non_negative(c.taxonomy.min_median_area, "taxonomy.min_median_area");
  positive(c.taxonomy.max_median_perimeter, "taxonomy.max_median_perimeter");
  if (c.taxonomy.knn < 1 || c.taxonomy.noise_nn < 1) throw ConfigError("config: knn and noise_nn must be at least 1");
}

std::string config_fingerprint(const PipelineConfig& c) {
  const json j = {{"footprints", c.footprints.generic_string()},
                  {"streets", c.streets.generic_string()},
                  {"external", c.external.generic_string()},
                  {"external_property", c.external_property},
                  {"branch_names", c.branch_names.generic_string()},
                  {"min_size", c.min_size},
                  {"k", c.k},
                  {"grid_cell", c.grid_cell},
                  {"preprocess", preprocess_json(c.preprocess)},
                  {"tessellation", tessellation_json(c.tessellation)},
                  {"morphometrics", morphometrics_json(c.morphometrics)},
                  {"taxonomy", taxonomy_json(c.taxonomy)}};
  return j.dump();
}

// ---------------------------------------------------------------- in memory

Morphology characterise(std::vector<Footprint> raw_blds, std::vector<Segment> raw_segs, const PipelineConfig& cfg) {
  Morphology m;
  m.blds = preprocess_buildings(std::move(raw_blds), cfg.preprocess).first;
  m.segs = node_street_segments(filter_segments(std::move(raw_segs)).first);
  m.graph = build_street_graph(m.segs, cfg.tessellation.node_snap);
  auto tcfg = cfg.tessellation;
  tcfg.workers = cfg.workers;
  m.tess = enclosed_tessellation(m.blds, m.segs, m.graph, tcfg);
  m.bld_adj = building_adjacency(m.blds, cfg.morphometrics.adjacency_tol);
  auto mcfg = cfg.morphometrics;
  mcfg.workers = cfg.workers;
  MorphologyInput in{m.blds, m.tess.cells, m.segs, &m.graph, &m.tess.contiguity, &m.bld_adj};
  m.table = assemble_feature_table(in, mcfg);
  return m;
}

std::vector<MorphotopeExtras> group_extras(const std::vector<std::vector<std::size_t>>& groups,
                                           std::span<const Footprint> blds, const ContiguityGraph& bld_adj,
                                           double adjacency_tol, unsigned workers) {
  std::vector<MorphotopeExtras> out(groups.size());
  parallel_for(groups.size(), workers,
               [&](std::size_t i) { out[i] = morphotope_extras(groups[i], blds, bld_adj, adjacency_tol); });
  return out;
}

std::string emit_map(const std::vector<TessCell>& cells, const std::vector<int>& morphotope,
                     const std::vector<int>& branch, std::size_t k) {
  if (morphotope.size() != cells.size() || branch.size() != cells.size()) {
    throw Error("emit_map: one label per cell expected");
  }
  std::vector<std::int64_t> m(morphotope.begin(), morphotope.end()), b(branch.begin(), branch.end());
  return io::cells_to_geojson(cells, {{"morphotope", m}, {"branch_k" + std::to_string(k), b}});
}

// ---------------------------------------------------------------- stages

namespace {

const char* kBuildings = "buildings.geojson";
const char* kStreets = "streets.geojson";
const char* kPreReport = "preprocess_report.json";
const char* kCells = "cells.geojson";
const char* kContiguity = "contiguity.csv";
const char* kRaw = "characters_raw.csv";
const char* kChars = "characters.csv";
const char* kLabels = "morphotopes.csv";
const char* kLinkage = "morphotope_linkage.csv";
const char* kProfiles = "profiles.csv";
const char* kTree = "taxonomy.json";
const char* kTreeLinkage = "taxonomy_linkage.csv";
const char* kNames = "branch_names.json";
const char* kMap = "map.geojson";
const char* kGrid = "grid.geojson";
const char* kConfusion = "confusion.csv";

std::string cut_name(std::size_t k) { return "cut_k" + std::to_string(k) + ".csv"; }
std::string branches_name(std::size_t k) { return "branches_k" + std::to_string(k) + ".csv"; }

struct Context {
  const PipelineConfig& cfg;
  json manifest;
  fs::path at(const std::string& name) const { return cfg.out / name; }
};

std::string graph_to_csv(const ContiguityGraph& g) {
  std::ostringstream os;
  os << "a,b\n";
  for (auto [a, b] : g.edges()) os << a << ',' << b << '\n';
  return os.str();
}

ContiguityGraph graph_from_csv(const fs::path& p, std::size_t n) {
  ContiguityGraph g(n);
  const auto rows = io::parse_csv(io::read_file(p));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto a = std::stoul(rows[r].at(0)), b = std::stoul(rows[r].at(1));
    if (a >= n || b >= n) throw Error(p.string() + ": node index out of range");
    g.add_edge(a, b);
  }
  return g;
}

std::vector<int> labels_from_csv(const fs::path& p, std::size_t n) {
  const auto rows = io::parse_csv(io::read_file(p));
  if (rows.size() != n + 1) throw Error(p.string() + ": expected " + std::to_string(n) + " rows");
  std::vector<int> labels(n);
  for (std::size_t r = 1; r < rows.size(); ++r) labels[r - 1] = std::stoi(rows[r].at(1));
  return labels;
}

std::vector<Footprint> load_buildings(const Context& cx) { return io::load_footprints(cx.at(kBuildings)); }
std::vector<Segment> load_streets(const Context& cx) { return io::load_segments(cx.at(kStreets)).segments; }
std::vector<TessCell> load_cells(const Context& cx) { return io::parse_cells(io::read_file(cx.at(kCells))); }

// profiles.csv: one row per morphotope with kept flag, extras and medians
FeatureTable profiles_table(const std::vector<MorphotopeProfile>& ps, const std::vector<char>& kept,
                            const std::vector<std::string>& columns) {
  std::vector<Id> ids;
  for (const auto& p : ps) ids.push_back(static_cast<Id>(p.id));
  std::vector<std::string> cols{"member_count", "kept", "likely_occupied", "area_top10", "perim_top10"};
  cols.insert(cols.end(), columns.begin(), columns.end());
  FeatureTable t(ids, cols);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    t.at(i, 0) = static_cast<double>(ps[i].member_count);
    t.at(i, 1) = kept[i] ? 1.0 : 0.0;
    t.at(i, 2) = ps[i].extras.likely_occupied;
    t.at(i, 3) = ps[i].extras.area_top10;
    t.at(i, 4) = ps[i].extras.perim_top10;
    for (std::size_t c = 0; c < columns.size(); ++c) t.at(i, 5 + c) = ps[i].medians[c];
  }
  return t;
}

std::vector<MorphotopeProfile> profiles_from_table(const FeatureTable& t, std::vector<char>& kept) {
  std::vector<MorphotopeProfile> ps(t.rows());
  kept.assign(t.rows(), 0);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto& p = ps[i];
    p.id = static_cast<int>(t.ids()[i]);
    p.member_count = static_cast<std::size_t>(t.at(i, 0));
    kept[i] = t.at(i, 1) != 0.0;
    p.extras.likely_occupied = static_cast<int>(t.at(i, 2));
    p.extras.area_top10 = t.at(i, 3);
    p.extras.perim_top10 = t.at(i, 4);
    for (std::size_t c = 5; c < t.cols(); ++c) p.medians.push_back(t.at(i, c));
  }
  return ps;
}

std::vector<MorphotopeProfile> kept_profiles(const Context& cx) {
  std::vector<char> kept;
  auto all = profiles_from_table(io::read_table(cx.at(kProfiles)), kept);
  std::vector<MorphotopeProfile> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (kept[i]) out.push_back(std::move(all[i]));
  }
  return out;
}

TaxonomyTree load_tree(const Context& cx) {
  TaxonomyTree tree;
  for (const auto& p : kept_profiles(cx)) tree.morphotope_ids.push_back(p.id);
  tree.dendrogram.leaves = tree.morphotope_ids.size();
  const auto rows = io::parse_csv(io::read_file(cx.at(kTreeLinkage)));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    Merge m;
    m.a = std::stoul(rows[r].at(0));
    m.b = std::stoul(rows[r].at(1));
    m.height = std::stod(rows[r].at(2));
    m.size = std::stoul(rows[r].at(3));
    tree.dendrogram.merges.push_back(m);
  }
  if (!cx.cfg.branch_names.empty()) tree.names = parse_branch_names(io::read_file(cx.cfg.branch_names));
  return tree;
}

// ---- individual stages; each returns its outputs

using Outputs = std::vector<std::string>;

Outputs stage_preprocess(Context& cx) {
  const auto& cfg = cx.cfg;
  auto [blds, brep] = preprocess_buildings(io::load_footprints(cfg.footprints), cfg.preprocess);
  auto load = io::load_segments(cfg.streets);
  auto [segs, srep] = filter_segments(std::move(load.segments));
  const auto noded = node_street_segments(segs);
  io::write_file_atomic(cx.at(kBuildings), io::footprints_to_geojson(blds));
  io::write_file_atomic(cx.at(kStreets), io::segments_to_geojson(noded));
  const json report = {{"buildings", blds.size()},
                       {"merged_pairs", brep.merged_pairs},
                       {"dropped_large", brep.dropped_large},
                       {"snapped_gaps", brep.snapped_gaps},
                       {"segments", noded.size()},
                       {"filtered_segments", srep.filtered_segments},
                       {"dropped_degenerate", load.dropped_degenerate},
                       {"missing_kind", load.missing_kind}};
  io::write_file_atomic(cx.at(kPreReport), report.dump(1) + "\n");
  return {kBuildings, kStreets, kPreReport};
}

Outputs stage_tessellate(Context& cx) {
  const auto blds = load_buildings(cx);
  const auto segs = load_streets(cx);
  const auto graph = build_street_graph(segs, cx.cfg.tessellation.node_snap);
  auto tcfg = cx.cfg.tessellation;
  tcfg.workers = cx.cfg.workers;
  const auto t = enclosed_tessellation(blds, segs, graph, tcfg);
  io::write_file_atomic(cx.at(kCells), io::cells_to_geojson(t.cells));
  io::write_file_atomic(cx.at(kContiguity), graph_to_csv(t.contiguity));
  return {kCells, kContiguity};
}

Outputs stage_characterise(Context& cx) {
  const auto blds = load_buildings(cx);
  const auto segs = load_streets(cx);
  const auto cells = load_cells(cx);
  if (cells.size() != blds.size()) throw Error("cells and buildings differ in count");
  const auto graph = build_street_graph(segs, cx.cfg.tessellation.node_snap);
  const auto contiguity = graph_from_csv(cx.at(kContiguity), cells.size());
  const auto bld_adj = building_adjacency(blds, cx.cfg.morphometrics.adjacency_tol);
  auto mcfg = cx.cfg.morphometrics;
  mcfg.workers = cx.cfg.workers;
  MorphologyInput in{blds, cells, segs, &graph, &contiguity, &bld_adj};
  auto table = measure_characters(in, mcfg);
  io::write_table(table, cx.at(kRaw));
  std::vector<Id> encl(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) encl[i] = cells[i].enclosure_id;
  impute_missing(table, encl);
  io::write_table(table, cx.at(kChars));
  return {kRaw, kChars};
}

Outputs stage_morphotopes(Context& cx) {
  const auto table = io::read_table(cx.at(kChars));
  const auto g = graph_from_csv(cx.at(kContiguity), table.rows());
  const auto r = sa3(table, g, cx.cfg.min_size, cx.cfg.workers);
  io::write_file_atomic(cx.at(kLabels), labels_to_csv(table.ids(), r.labels));
  io::write_file_atomic(cx.at(kLinkage), dendrogram_to_csv(r.dendrogram));
  return {kLabels, kLinkage};
}

Outputs stage_taxonomy(Context& cx) {
  const auto& cfg = cx.cfg;
  const auto blds = load_buildings(cx);
  const auto table = io::read_table(cx.at(kChars));
  const auto labels = labels_from_csv(cx.at(kLabels), table.rows());
  const auto bld_adj = building_adjacency(blds, cfg.morphometrics.adjacency_tol);
  const auto groups = label_groups(labels);
  const auto extras = group_extras(groups, blds, bld_adj, cfg.morphometrics.adjacency_tol, cfg.workers);
  std::vector<int> ids(groups.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto profiles = profile_groups(groups, ids, table, extras, cfg.workers);
  std::vector<char> kept(profiles.size());
  std::vector<MorphotopeProfile> kept_ps;
  std::vector<int> kept_ids;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    kept[i] = !is_outlier(profiles[i], table.columns(), cfg.taxonomy);
    if (kept[i]) {
      kept_ps.push_back(profiles[i]);
      kept_ids.push_back(profiles[i].id);
    }
  }
  if (kept_ps.empty()) throw Error("taxonomy: no morphotopes left after outlier exclusion");
  io::write_table(profiles_table(profiles, kept, table.columns()), cx.at(kProfiles));
  auto tree = build_taxonomy(standardize(kept_ps), kept_ids, cfg.taxonomy.knn, cfg.workers);
  if (!cfg.branch_names.empty()) tree.names = parse_branch_names(io::read_file(cfg.branch_names));
  io::write_file_atomic(cx.at(kTree), taxonomy_to_json(tree));
  io::write_file_atomic(cx.at(kTreeLinkage), dendrogram_to_csv(tree.dendrogram));
  io::write_file_atomic(cx.at(kNames), branch_names_to_json(tree.names));
  return {kProfiles, kTree, kTreeLinkage, kNames};
}

Outputs stage_cut(Context& cx) {
  const auto tree = load_tree(cx);
  if (cx.cfg.k > tree.dendrogram.leaves) {
    throw ConfigError("config: k = " + std::to_string(cx.cfg.k) + " exceeds the " +
                      std::to_string(tree.dendrogram.leaves) + " retained morphotopes");
  }
  const auto cut = flat_cut(tree, cx.cfg.k);
  io::write_file_atomic(cx.at(cut_name(cx.cfg.k)), cut_to_csv(tree, cut));
  return {cut_name(cx.cfg.k)};
}

Outputs stage_assign_noise(Context& cx) {
  const auto& cfg = cx.cfg;
  const auto blds = load_buildings(cx);
  const auto table = io::read_table(cx.at(kChars));
  const auto labels = labels_from_csv(cx.at(kLabels), table.rows());
  const auto g = graph_from_csv(cx.at(kContiguity), table.rows());
  const auto kept = kept_profiles(cx);
  std::map<int, int> branch_of;  // morphotope -> branch
  {
    const auto rows = io::parse_csv(io::read_file(cx.at(cut_name(cfg.k))));
    for (std::size_t r = 1; r < rows.size(); ++r) branch_of[std::stoi(rows[r].at(0))] = std::stoi(rows[r].at(1));
  }
  // demoted morphotopes fall back to noise
  std::vector<int> effective = labels;
  for (auto& l : effective) {
    if (l != kNoise && !branch_of.contains(l)) l = kNoise;
  }
  const auto groups = noise_groups(effective, g);
  const auto bld_adj = building_adjacency(blds, cfg.morphometrics.adjacency_tol);
  const auto extras = group_extras(groups, blds, bld_adj, cfg.morphometrics.adjacency_tol, cfg.workers);
  std::vector<int> gids(groups.size());
  std::iota(gids.begin(), gids.end(), 0);
  const auto noise = profile_groups(groups, gids, table, extras, cfg.workers);
  const auto st = fit_standardizer(kept);
  std::vector<int> kept_branch;
  for (const auto& p : kept) kept_branch.push_back(branch_of.at(p.id));
  const auto assigned = assign_noise(noise, st, st.apply(kept), kept_branch, cfg.taxonomy.noise_nn,
                                     cfg.taxonomy.discard_noise, cfg.workers);
  std::vector<int> branch(labels.size(), kNoise);
  std::vector<int> group_of(labels.size(), -1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (effective[i] != kNoise) branch[i] = branch_of.at(effective[i]);
  }
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (auto v : groups[gi]) {
      branch[v] = assigned[gi];
      group_of[v] = static_cast<int>(gi);
    }
  }
  std::ostringstream os;
  os << "cell_id,morphotope,noise_group,branch\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << table.ids()[i] << ',' << labels[i] << ',' << group_of[i] << ',' << branch[i] << '\n';
  }
  io::write_file_atomic(cx.at(branches_name(cfg.k)), os.str());
  return {branches_name(cfg.k)};
}

Outputs stage_evaluate(Context& cx) {
  const auto& cfg = cx.cfg;
  const auto blds = load_buildings(cx);
  const auto cells = load_cells(cx);
  const auto rows = io::parse_csv(io::read_file(cx.at(branches_name(cfg.k))));
  if (rows.size() != cells.size() + 1) throw Error(branches_name(cfg.k) + ": row count differs from cells");
  std::vector<int> morph(cells.size()), branch(cells.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    morph[r - 1] = std::stoi(rows[r].at(1));
    branch[r - 1] = std::stoi(rows[r].at(3));
  }
  Outputs out{kMap, kGrid};
  io::write_file_atomic(cx.at(kMap), emit_map(cells, morph, branch, cfg.k));
  io::write_file_atomic(cx.at(kGrid), grid_to_geojson(grid_abundance(blds, branch, {cfg.grid_cell, {}})));
  if (!cfg.external.empty()) {
    const auto ext = io::load_labeled_polygons(cfg.external, cfg.external_property);
    io::write_file_atomic(cx.at(kConfusion), confusion_to_csv(cross_tabulate(blds, branch, ext, cfg.workers)));
    out.emplace_back(kConfusion);
  }
  return out;
}

struct StageDef {
  std::function<std::vector<fs::path>(const Context&)> inputs;
  std::function<Outputs(Context&)> run;
};

std::map<std::string, StageDef> stage_table() {
  auto arts = [](std::vector<std::string> names) {
    return [names](const Context& cx) {
      std::vector<fs::path> p;
      for (const auto& n : names) p.push_back(cx.at(n));
      return p;
    };
  };
  std::map<std::string, StageDef> s;
  s["preprocess"] = {[](const Context& cx) {
                       if (cx.cfg.footprints.empty()) throw ConfigError("config: footprints must be set");
                       if (cx.cfg.streets.empty()) throw ConfigError("config: streets must be set");
                       return std::vector<fs::path>{cx.cfg.footprints, cx.cfg.streets};
                     },
                     stage_preprocess};
  s["tessellate"] = {arts({kBuildings, kStreets}), stage_tessellate};
  s["characterise"] = {arts({kBuildings, kStreets, kCells, kContiguity}), stage_characterise};
  s["morphotopes"] = {arts({kChars, kContiguity}), stage_morphotopes};
  s["taxonomy"] = {[](const Context& cx) {
                     std::vector<fs::path> p{cx.at(kBuildings), cx.at(kChars), cx.at(kLabels)};
                     if (!cx.cfg.branch_names.empty()) p.push_back(cx.cfg.branch_names);
                     return p;
                   },
                   stage_taxonomy};
  s["cut"] = {[](const Context& cx) {
                std::vector<fs::path> p{cx.at(kProfiles), cx.at(kTreeLinkage)};
                if (!cx.cfg.branch_names.empty()) p.push_back(cx.cfg.branch_names);
                return p;
              },
              stage_cut};
  s["assign-noise"] = {[](const Context& cx) {
                         return std::vector<fs::path>{cx.at(kBuildings), cx.at(kChars),   cx.at(kLabels),
                                                      cx.at(kContiguity), cx.at(kProfiles), cx.at(cut_name(cx.cfg.k))};
                       },
                       stage_assign_noise};
  s["evaluate"] = {[](const Context& cx) {
                     std::vector<fs::path> p{cx.at(kBuildings), cx.at(kCells), cx.at(branches_name(cx.cfg.k))};
                     if (!cx.cfg.external.empty()) p.push_back(cx.cfg.external);
                     return p;
                   },
                   stage_evaluate};
  return s;
}

std::string manifest_key(const Context& cx, const fs::path& p) {
  const auto rel = p.lexically_relative(cx.cfg.out);
  return !rel.empty() && *rel.begin() != ".." ? rel.generic_string() : p.generic_string();
}

StageResult run_one(Context& cx, const std::string& name, const StageDef& def) {
  const auto inputs = def.inputs(cx);
  json in_hashes = json::object();
  for (const auto& p : inputs) {
    if (!fs::exists(p)) throw MissingArtifact(p);
    in_hashes[manifest_key(cx, p)] = sha256_file(p);
  }
  const std::string config_hash = sha256_hex(config_fingerprint(cx.cfg));
  auto& entry = cx.manifest["stages"][name];
  if (entry.is_object() && entry.value("config", "") == config_hash && entry.value("inputs", json()) == in_hashes) {
    bool fresh = true;
    for (const auto& [out, hash] : entry.at("outputs").items()) {
      const auto p = cx.at(out);
      if (!fs::exists(p) || sha256_file(p) != hash.get<std::string>()) fresh = false;
    }
    if (fresh) return {name, true};
  }
  const auto outputs = def.run(cx);
  json out_hashes = json::object();
  for (const auto& o : outputs) out_hashes[o] = sha256_file(cx.at(o));
  entry = {{"config", config_hash}, {"inputs", in_hashes}, {"outputs", out_hashes}};
  io::write_file_atomic(cx.at("manifest.json"), cx.manifest.dump(1) + "\n");
  return {name, false};
}

}  // namespace

std::vector<StageResult> run_stage(const std::string& stage, const PipelineConfig& cfg) {
  validate(cfg);
  const auto table = stage_table();
  std::vector<std::string> order;
  if (stage == "all") {
    order = stage_names();
  } else if (table.contains(stage)) {
    order = {stage};
  } else {
    throw ConfigError("unknown stage " + stage);
  }
  Context cx{cfg, json::object()};
  const auto mpath = cx.at("manifest.json");
  if (fs::exists(mpath)) {
    try {
      cx.manifest = json::parse(io::read_file(mpath));
    } catch (const json::exception&) {
      cx.manifest = json::object();  // rebuilt from scratch
    }
  }
  if (!cx.manifest.contains("stages") || !cx.manifest["stages"].is_object()) cx.manifest["stages"] = json::object();
  std::vector<StageResult> results;
  for (const auto& s : order) results.push_back(run_one(cx, s, table.at(s)));
  return results;
}

}  // namespace himoc
