#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "filament/analysis.hpp"
#include "filament/field.hpp"
#include "filament/probe.hpp"
#include "filament/ranking.hpp"
#include "filament/types.hpp"

namespace filament {

// Field files: one line of compact JSON header terminated by '\n', followed
// by the raw little-endian payload in x-fastest order.
//   {"dims":[nx,ny,nz],"dtype":"f32le"|"u32le","extent":[[0,0,0],[1,1,1]],
//    "meta":{...},"order":"x-fastest"}

struct FieldHeader {
  GridDims dims;
  std::string dtype;  // "f32le" or "u32le"
  nlohmann::json meta = nlohmann::json::object();
};

std::string encode_field(const ScalarField& field, const nlohmann::json& meta = nlohmann::json::object());
std::string encode_labels(const ComponentLabels& labels, const nlohmann::json& meta = nlohmann::json::object());
nlohmann::json field_header_json(const GridDims& dims, const std::string& dtype, const nlohmann::json& meta);

void write_field(const std::filesystem::path& path, const ScalarField& field,
                 const nlohmann::json& meta = nlohmann::json::object());
void write_labels(const std::filesystem::path& path, const ComponentLabels& labels,
                  const nlohmann::json& meta = nlohmann::json::object());

/// Reads only the header line. Throws ParseError.
FieldHeader read_field_header(const std::filesystem::path& path);
/// Throws ParseError on malformed headers, wrong dtype, or short payloads.
ScalarField read_field(const std::filesystem::path& path, FieldHeader* header = nullptr);
std::vector<std::uint32_t> read_labels(const std::filesystem::path& path, FieldHeader* header = nullptr);

/// z = const (axis 2), y = const (axis 1) or x = const (axis 0) plane, row-major
/// with the lower remaining axis fastest. Throws InvariantError on a bad index.
std::vector<float> field_slice(const ScalarField& field, int axis, int index, int* width, int* height);

// Rankings and tables.

/// CSV with header `surface,rank,score`; rank is 1-based.
void write_ranking_csv(std::ostream& out, const Ranking& ranking, const std::vector<Token>& tokens);
nlohmann::json ranking_to_json(const Ranking& ranking, const std::vector<Token>& tokens,
                               std::size_t limit = static_cast<std::size_t>(-1));

/// CSV `word,mcpm,euclid,cosine,delta`; absent ranks and infinite deltas print as "inf".
void write_diff_table_csv(std::ostream& out, const std::vector<DiffRow>& rows);
nlohmann::json diff_table_to_json(const std::vector<DiffRow>& rows);

inline constexpr std::size_t kWordCloudSize = 30;
/// Top `size` (surface, score) pairs per ranking, keyed by metric name.
nlohmann::json word_cloud_json(const std::vector<Ranking>& rankings, const std::vector<Token>& tokens,
                               std::size_t size = kWordCloudSize);

nlohmann::json direction_stats_to_json(const DirectionStats& stats);

/// Header line {"kind":"trajectories","n_probes","n_points","dtype":"f32le","seed":[x,y,z]}
/// then n_probes * n_points * 3 floats.
void write_trajectories(const std::filesystem::path& path, const TrajectorySet& traj);
TrajectorySet read_trajectories(const std::filesystem::path& path);

/// At most `max_polylines` evenly spaced polylines, each thinned to at most `max_points` vertices.
nlohmann::json trajectory_sample_json(const TrajectorySet& traj, std::size_t max_polylines = 200,
                                      std::size_t max_points = 101);

void write_convergence_csv(const std::filesystem::path& path, const std::vector<double>& series);

/// TSV `id surface cluster`, "unassigned" for tokens outside all components.
void write_token_clusters(const std::filesystem::path& path, const PointCloud& cloud, const ClusterLabeling& clusters);

/// Shortest round-trip decimal form.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace filament
