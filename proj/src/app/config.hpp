#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "filament/analysis.hpp"
#include "filament/mcpm.hpp"
#include "filament/probe.hpp"
#include "filament/types.hpp"

namespace filament::app {

struct RunConfig {
  std::filesystem::path points;   // TSV `surface x y z [meta]`
  std::filesystem::path vectors;  // word2vec text; enables euclidean/cosine baselines
  bool pca = false;               // project `vectors` to 3D when no points table is given
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  McpmParams mcpm;
  ProbeParams probe;
  int n_repeats = 1;
  Threshold tau = AutoThreshold{};
  double assign_radius = 2.0;  // voxels
  std::size_t diff_top_k = 50;
  int direction_bins = 36;
};

/// Environment override for the output directory.
inline constexpr const char* kOutDirEnv = "FILAMENT_OUT_DIR";

nlohmann::json to_json(const RunConfig& config);

/// Missing keys keep their defaults; unknown keys are rejected. Throws ParseError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Parameter invariants plus the mandatory seed. Throws InvariantError;
/// returns advisory warnings.
std::vector<std::string> validate(const RunConfig& config);

std::uint64_t seed_of(const RunConfig& config);

/// Tokens and unit-cube positions for a run, plus native vectors when given.
struct Dataset {
  PointCloud cloud;
  std::optional<EmbeddingSet> vectors;
};

/// Loads points (or PCA-projected vectors) and normalizes them into the unit cube.
Dataset load_dataset(const RunConfig& config);

/// Reads the normalized points a previous fit wrote to out_dir, attaching
/// vectors from the config when present.
Dataset load_fitted_dataset(const RunConfig& config);

}  // namespace filament::app
