#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "filament/field.hpp"
#include "filament/probe.hpp"
#include "filament/ranking.hpp"
#include "filament/types.hpp"

namespace filament {

// ---- baseline metrics ------------------------------------------------------

/// Ascending Euclidean distance to the query; ties by ascending id.
Ranking euclidean_ranking(const EmbeddingSet& set, TokenId query);
Ranking euclidean_ranking(const PointCloud& cloud, TokenId query);

/// Descending cosine of the angle to the query. Zero vectors are listed last
/// with score -infinity. Throws InvariantError if the query vector is zero.
Ranking cosine_ranking(const EmbeddingSet& set, TokenId query);

inline constexpr double kZeroNormScore = -std::numeric_limits<double>::infinity();

// ---- ranking comparison ----------------------------------------------------

/// One row of a ranking difference table. Ranks are 1-based; nullopt means the
/// token is absent from that ranking.
struct DiffRow {
  TokenId token = 0;
  std::string surface;
  std::optional<std::size_t> rank_a;
  std::optional<std::size_t> rank_b;
  std::optional<std::size_t> rank_c;

  /// rank_b - rank_a, with +inf when b lacks the token and -inf when a does.
  /// NaN when both lack it (a row contributed by c alone); such rows sort last.
  double delta() const;
};

/// Rows for the union of the top_k entries of a, b and c, ordered by
/// descending rank_b - rank_a (ties by rank_a, then id). Throws InvariantError
/// when the rankings disagree on the query.
std::vector<DiffRow> rank_diff_table(const Ranking& a, const Ranking& b, const Ranking& c, std::size_t top_k,
                                     const std::vector<Token>& tokens);

/// 1-based rank of every token in `r`, nullopt if absent.
std::vector<std::optional<std::size_t>> rank_positions(const Ranking& r, std::size_t n_tokens);

// ---- trace-network clustering ----------------------------------------------

/// Keep the brightest voxels that together hold `mass_fraction` of the total trace mass.
struct AutoThreshold {
  double mass_fraction = 0.75;
};
using Threshold = std::variant<double, AutoThreshold>;

/// Value at which the brightest voxels first reach `mass_fraction` of the total mass.
double auto_threshold(const ScalarField& trace, double mass_fraction);

inline constexpr std::uint32_t kBackground = 0;

struct ComponentLabels {
  GridDims dims;
  std::vector<std::uint32_t> labels;  // x-fastest, kBackground below tau
  std::uint32_t n_components = 0;
  std::vector<double> component_mass;  // index label-1; non-increasing
  double tau = 0.0;
};

/// 26-connected components of {voxel : value >= tau}, labeled 1..n by
/// descending mass (ties by lowest voxel index).
ComponentLabels threshold_components(const ScalarField& trace, Threshold tau);

struct ClusterLabeling {
  ComponentLabels components;
  std::vector<std::optional<std::uint32_t>> token_labels;  // nullopt = unassigned
  std::uint32_t n_components = 0;
  std::vector<double> component_mass;
};

/// Each token takes the label of the nearest labeled voxel center within
/// `assign_radius_voxels` voxel lengths, or stays unassigned.
ClusterLabeling assign_clusters(const PointCloud& cloud, const ComponentLabels& labels,
                                double assign_radius_voxels = 2.0);

// ---- directional statistics ------------------------------------------------

struct DirectionStats {
  std::vector<double> histogram;  // azimuth bins over [-pi, pi), sums to 1
  Vec3 plane_u;                   // dominant plane of the step directions
  Vec3 plane_v;
  double bimodality = 0.0;  // in [0, 1]
  double peak_azimuth = 0.0;
  double circular_variance = 0.0;
  int n_modes = 0;  // smoothed peaks above twice the uniform level
};

inline constexpr double kBimodalSectorHalfWidth = 0.5235987755982988;  // pi/6

/// Step directions projected onto their two principal axes and binned by
/// azimuth. bimodality is the histogram mass inside the best antipodal pair
/// of sectors (half-width kBimodalSectorHalfWidth), rescaled so a uniform
/// histogram scores 0 and two opposite spikes score 1.
DirectionStats direction_stats(const TrajectorySet& traj, int bins = 36);

/// Same statistic on an explicit direction list.
DirectionStats direction_stats(const std::vector<Vec3>& directions, int bins = 36);

}  // namespace filament
