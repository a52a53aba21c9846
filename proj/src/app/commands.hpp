#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "app/config.hpp"
#include "filament/analysis.hpp"
#include "filament/field.hpp"
#include "filament/probe.hpp"
#include "filament/ranking.hpp"

namespace filament::app {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 2;
inline constexpr int kExitInvariant = 3;
inline constexpr int kExitUnknownToken = 4;
inline constexpr int kExitPortInUse = 5;

/// Probe source: a token surface or a unit-cube position.
struct ProbeQuery {
  std::optional<std::string> token;
  std::optional<Vec3> pos;
};

struct ProbeOutcome {
  std::optional<TokenId> query;
  Vec3 seed;
  Ranking mcpm;
  std::optional<Ranking> euclidean;  // only with native vectors and a token query
  std::optional<Ranking> cosine;
  std::vector<DiffRow> diff;
  TrajectorySet trajectories;  // first repeat of the ranking run
  DirectionStats stats;
};

/// Resolves a surface. Throws UnknownTokenError with the nearest surfaces.
TokenId resolve_token(const PointCloud& cloud, const std::string& surface);

/// Everything cmd_probe reports, without touching the disk. Uses Rng(seed) exactly
/// as mcpm_similarity does, so results equal the library call.
ProbeOutcome run_probe_query(const ScalarField& trace, const Dataset& data, const RunConfig& config,
                             const ProbeQuery& query);

ScalarField load_trace(const RunConfig& config);

/// trace.field, deposit.field, convergence.csv, points.tsv, resolved-config.json in out_dir.
void cmd_fit(const RunConfig& config, std::ostream& log);

/// Rankings (CSV + JSON), diff table, direction stats, word cloud and
/// trajectories in out_dir/probe.
void cmd_probe(const RunConfig& config, const ProbeQuery& query, std::ostream& log);

/// One ranking as CSV on `out`, truncated to `limit` rows.
void cmd_rank(const RunConfig& config, const std::string& token, Metric metric, std::size_t limit, std::ostream& out);

/// labels.field (u32), token_clusters.tsv and clusters.json in out_dir/cluster.
void cmd_cluster(const RunConfig& config, std::ostream& log);

struct ExportRequest {
  std::string what = "slice";   // slice | raw | points
  std::string field = "trace";  // trace | deposit
  int axis = 2;
  int index = 0;
  std::filesystem::path output;
};

/// slice: CSV of one field plane; raw: headerless f32le payload; points: normalized TSV.
void cmd_export(const RunConfig& config, const ExportRequest& request, std::ostream& log);

class PortInUseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Blocks serving the REST API. Throws PortInUseError when the port cannot be bound.
void cmd_serve(const RunConfig& config, const std::string& host, int port, int probe_workers, std::ostream& log);

/// Axis name ("x"|"y"|"z") or digit to 0..2; throws InvariantError.
int parse_axis(const std::string& s);

}  // namespace filament::app
