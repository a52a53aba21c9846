#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "filament/field.hpp"
#include "filament/mcpm.hpp"
#include "filament/ranking.hpp"
#include "filament/rng.hpp"
#include "filament/types.hpp"

namespace filament {

enum class CountingMode { per_event, once_per_agent };
enum class SeedMode { exact, snap_to_trace_max };

struct ProbeParams {
  std::size_t n_probes = 900;
  int n_steps = 500;
  double sense_distance = 0.04;
  double sense_angle = 1.0;  // radians
  double move_distance = 0.004;
  double discovery_radius = 1.0 / 300.0;  // domain is the unit cube
  double trace_floor = 1e-9;
  double sharpness = 4.0;  // exponent on the sensed values; 1 = plain proportional rule
  CountingMode counting = CountingMode::per_event;
  SeedMode seed_mode = SeedMode::exact;
  int threads = 0;
};

inline constexpr double kMinDiscoveryRadius = 1.0 / 400.0;
inline constexpr double kMaxDiscoveryRadius = 1.0 / 200.0;

/// Throws InvariantError on hard violations; returns a warning text when the
/// discovery radius lies outside [1/400, 1/200] of the domain.
std::optional<std::string> validate(const ProbeParams& params);

/// Trajectories of one probe run, stored flat: probe p owns points
/// [p*(n_steps+1), (p+1)*(n_steps+1)) and directions [p*n_steps, (p+1)*n_steps).
struct TrajectorySet {
  Vec3 seed;
  std::size_t n_probes = 0;
  int n_steps = 0;
  std::vector<Vec3> points;
  std::vector<Vec3> step_directions;

  std::span<const Vec3> polyline(std::size_t probe) const {
    const std::size_t len = static_cast<std::size_t>(n_steps) + 1;
    return std::span<const Vec3>(points).subspan(probe * len, len);
  }
  std::span<const Vec3> directions(std::size_t probe) const {
    const auto len = static_cast<std::size_t>(n_steps);
    return std::span<const Vec3>(step_directions).subspan(probe * len, len);
  }
};

struct DiscoveryCounts {
  std::vector<std::uint64_t> counts;  // per token id
  std::vector<double> normalized;     // counts / total, excluded tokens at 0
  std::vector<bool> excluded;         // within discovery_radius of the seed
};

/// Turn probability of the steering phase: (p1 + eps) / (p0 + p1 + 2 eps), with
/// both shifted readings raised to `sharpness` when it differs from 1.
double turn_probability(double p0, double p1, double eps, double sharpness = 1.0);

/// Rotates unit `from` toward unit `to` by `angle`, capped at the angle
/// between them so the result never passes `to`.
Vec3 rotate_toward(const Vec3& from, const Vec3& to, double angle);

/// One sensing + steering step over a read-only trace, reflecting at the cube faces.
AgentState probe_step(const AgentState& agent, const ScalarField& trace, const ProbeParams& params, Rng& rng);

/// n_probes independent walks from `seed`; probe p uses rng.split(p).
TrajectorySet run_probes(const ScalarField& trace, const Vec3& seed, const ProbeParams& params, const Rng& rng);

/// Counts proximity events: every token within discovery_radius of a
/// post-step position gets +1 per (probe, step), or once per probe in
/// once_per_agent mode.
DiscoveryCounts discover(const TrajectorySet& traj, const PointCloud& cloud, const ProbeParams& params);

/// Brightest trace voxel center within discovery_radius of `p`, or `p` itself.
Vec3 snap_to_trace_max(const ScalarField& trace, const Vec3& p, double radius);

/// Reachability ranking from `seed`; scores are normalized discovery counts
/// averaged over n_repeats runs (repeat r uses rng.split(r)). Discovered
/// tokens only, ties by ascending id; `query` is never listed.
Ranking mcpm_similarity_from(const ScalarField& trace, const PointCloud& cloud, const Vec3& seed,
                             std::optional<TokenId> query, const ProbeParams& params, const Rng& rng,
                             int n_repeats = 1);

/// mcpm_similarity_from seeded at the query token. Throws UnknownTokenError.
Ranking mcpm_similarity(const ScalarField& trace, const PointCloud& cloud, TokenId query, const ProbeParams& params,
                        const Rng& rng, int n_repeats = 1);

}  // namespace filament
