// Batch driver: staged pipeline subcommands plus a synthetic scene generator.

#include "himoc/fixtures.hpp"
#include "himoc/io.hpp"
#include "himoc/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <iostream>
#include <optional>

using namespace himoc;

namespace {

struct StageArgs {
  std::string config;
  std::optional<unsigned> workers;
  std::optional<std::size_t> k;
  std::optional<std::size_t> min_size;
};

int run_pipeline(const std::string& stage, const StageArgs& a) {
  const fs::path cfg_path = fs::absolute(a.config);
  if (!fs::exists(cfg_path)) {
    std::cerr << "config not found: " << cfg_path.string() << "\n";
    return 3;
  }
  PipelineConfig cfg = parse_config(io::read_file(cfg_path), cfg_path.parent_path());
  if (a.workers) cfg.workers = *a.workers;
  if (a.k) cfg.k = *a.k;
  if (a.min_size) cfg.min_size = *a.min_size;
  validate(cfg);
  for (const auto& r : run_stage(stage, cfg)) {
    std::cout << r.stage << ": " << (r.skipped ? "up to date" : "done") << "\n";
  }
  return 0;
}

int run_fixture(std::uint64_t seed, const std::string& pattern, const std::string& spec_path, const fs::path& out) {
  fixtures::SceneSpec spec;
  if (!spec_path.empty()) {
    spec = fixtures::spec_from_json(io::read_file(spec_path));
    spec.seed = seed;
  } else if (pattern == "two") {
    spec = fixtures::two_pattern_spec(seed);
  } else if (pattern == "four") {
    spec = fixtures::four_pattern_spec(seed);
  } else {
    throw ConfigError("unknown scene: " + pattern);
  }
  const auto scene = fixtures::generate(spec);
  fs::create_directories(out);
  io::write_file_atomic(out / "footprints.geojson", io::footprints_to_geojson(scene.footprints));
  io::write_file_atomic(out / "streets.geojson", io::segments_to_geojson(scene.segments));
  io::write_file_atomic(out / "labels.csv", fixtures::labels_to_csv(scene));
  io::write_file_atomic(out / "spec.json", fixtures::spec_to_json(spec));
  // ready-to-run config; synthetic blocks hold at most ~100 buildings, so morphotopes are kept small
  const nlohmann::ordered_json cfg{{"footprints", "footprints.geojson"},
                                   {"streets", "streets.geojson"},
                                   {"out", "run"},
                                   {"min_size", 10},
                                   {"k", 8}};
  io::write_file_atomic(out / "config.json", cfg.dump(2) + "\n");
  std::cout << scene.footprints.size() << " buildings, " << scene.segments.size() << " street segments -> "
            << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical morphotope classification"};
  app.require_subcommand(1);

  StageArgs args;
  std::string chosen;
  std::vector<std::string> stages = stage_names();
  stages.push_back("all");
  for (const auto& s : stages) {
    auto* sub = app.add_subcommand(s, s == "all" ? "Run every stage in order" : "Run the " + s + " stage");
    sub->add_option("--config", args.config, "Pipeline config JSON")->required();
    sub->add_option("--workers", args.workers, "Worker threads (outputs do not depend on it)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--k", args.k, "Number of branches for the flat cut")->check(CLI::PositiveNumber);
    sub->add_option("--min-size", args.min_size, "Minimum morphotope size (default 75)")->check(CLI::Range(2, 1 << 30));
    sub->callback([&chosen, s] { chosen = s; });
  }

  std::uint64_t seed = 1;
  std::string pattern = "four", spec_path;
  fs::path fixture_out = "scene";
  auto* fx = app.add_subcommand("fixture", "Write a synthetic labelled scene");
  fx->add_option("--seed", seed, "Generator seed");
  fx->add_option("--scene", pattern, "Built-in scene")->check(CLI::IsMember({"two", "four"}));
  fx->add_option("--spec", spec_path, "Scene spec JSON")->check(CLI::ExistingFile);
  fx->add_option("--out", fixture_out, "Output directory");
  fx->callback([&chosen] { chosen = "fixture"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (chosen == "fixture") return run_fixture(seed, pattern, spec_path, fixture_out);
    return run_pipeline(chosen, args);
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.path.filename().string() << " (" << e.path.string() << ")\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
