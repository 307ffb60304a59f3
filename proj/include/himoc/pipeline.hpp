#pragma once

#include "himoc/evaluation.hpp"
#include "himoc/morphometrics.hpp"
#include "himoc/preprocess.hpp"
#include "himoc/sa3.hpp"
#include "himoc/taxonomy.hpp"
#include "himoc/tessellation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace himoc {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path footprints;
  fs::path streets;
  fs::path external;  // optional labelled polygons for evaluate
  std::string external_property = "class";
  fs::path branch_names;  // optional node id -> name JSON
  fs::path out = "out";
  PreprocessConfig preprocess;
  TessellationConfig tessellation;
  MorphConfig morphometrics;
  TaxonomyConfig taxonomy;
  std::size_t min_size = 75;
  std::size_t k = 8;
  double grid_cell = 50000.0;
  unsigned workers = 1;
};

/// Config violation: reported with exit code 3.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing prerequisite artifact: exit code 2.
class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const fs::path& p) : Error("missing artifact: " + p.string()), path(p) {}
  fs::path path;
};

/// Relative paths resolve against `base`. Unknown keys are rejected.
PipelineConfig parse_config(std::string_view json, const fs::path& base = {});
void validate(const PipelineConfig& cfg);
/// Canonical JSON of everything that can change outputs (not workers).
std::string config_fingerprint(const PipelineConfig& cfg);

/// In-memory run from footprints to morphotopes.
struct Morphology {
  std::vector<Footprint> blds;
  std::vector<Segment> segs;  // noded
  StreetGraph graph;
  EnclosedTessellation tess;
  ContiguityGraph bld_adj;
  FeatureTable table;  // imputed
};

Morphology characterise(std::vector<Footprint> raw_blds, std::vector<Segment> raw_segs, const PipelineConfig& cfg);

/// Extras per group of building rows.
std::vector<MorphotopeExtras> group_extras(const std::vector<std::vector<std::size_t>>& groups,
                                           std::span<const Footprint> blds, const ContiguityGraph& bld_adj,
                                           double adjacency_tol, unsigned workers);

/// Cells with `morphotope` and `branch_k{K}` properties.
std::string emit_map(const std::vector<TessCell>& cells, const std::vector<int>& morphotope,
                     const std::vector<int>& branch, std::size_t k);

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> s{"preprocess", "tessellate",   "characterise", "morphotopes",
                                          "taxonomy",   "cut",          "assign-noise", "evaluate"};
  return s;
}

struct StageResult {
  std::string stage;
  bool skipped = false;  // manifest matched
};

/// Runs one stage (or "all") against the artifact directory `cfg.out`.
/// Throws MissingArtifact, ConfigError or Error.
std::vector<StageResult> run_stage(const std::string& stage, const PipelineConfig& cfg);

/// SHA-256 of a file as lowercase hex.
std::string sha256_file(const fs::path& p);
std::string sha256_hex(std::string_view data);

}  // namespace himoc
