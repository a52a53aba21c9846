#pragma once

#include <filesystem>
#include <vector>

#include "filament/types.hpp"

namespace filament {

/// Reads the word2vec text layout: a "N D" header line, then N rows of
/// "surface v1 ... vD". Surfaces are kept verbatim (POS suffixes included).
/// Throws ParseError naming the offending line.
EmbeddingSet load_word2vec_text(const std::filesystem::path& path);

/// Reads a 3D point table with header `surface x y z [meta]` (tab separated).
/// Positions are returned as written; bbox_original is their tight bound.
PointCloud load_points_3d(const std::filesystem::path& path);

void save_points_3d(const std::filesystem::path& path, const PointCloud& cloud);

struct PcaProjection {
  PointCloud cloud;
  std::vector<std::vector<double>> directions;  // out_dim orthonormal rows of length D
  std::vector<double> explained_variance;       // non-increasing
  bool rank_deficient = false;                  // trailing components were zero-padded
};

/// Projects centered vectors onto the top principal directions of the
/// sample covariance (population normalization, 1/N).
PcaProjection pca_project(const EmbeddingSet& set, int out_dim = 3);

/// Isotropic affine map into [margin, 1-margin]^3: the longest bbox side
/// spans the range and the shorter axes are centered.
PointCloud normalize_to_unit_cube(const PointCloud& cloud, double margin = 0.05);

/// Builds a PointCloud sharing tokens with `set` and the given positions.
PointCloud cloud_from_positions(const std::vector<Token>& tokens, std::vector<Vec3> positions);

}  // namespace filament
