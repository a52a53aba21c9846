#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "filament/field.hpp"
#include "filament/rng.hpp"
#include "filament/types.hpp"

namespace filament {

enum class SpawnMode { data_points, uniform };

/// deterministic: agent moves run in parallel, deposition is merged in agent
/// order, so results are bit-identical for any thread count.
/// fast: deposition uses atomic adds; statistically reproducible only.
enum class ExecutionMode { deterministic, fast };

/// Transport-network fitting parameters. Defaults are non-canonical
/// reconstructions of the usual MCPM loop; lengths are in unit-cube units.
struct McpmParams {
  std::size_t n_agents = 1'000'000;
  int n_steps = 600;
  GridDims grid{256, 256, 256};
  double sense_distance = 0.005;
  double sense_angle = 1.0;  // radians
  double move_distance = 0.001;
  double data_deposit = 10.0;  // per data point per step
  double agent_deposit = 0.1;  // per agent per step
  double decay = 0.1;
  int diffusion_passes = 1;
  double sharpness = 4.0;
  int trace_window = 100;
  SpawnMode spawn = SpawnMode::data_points;
  ExecutionMode mode = ExecutionMode::deterministic;
  int threads = 0;  // 0 = hardware concurrency
};

/// Throws InvariantError. move_distance may be 0 (frozen agents).
void validate(const McpmParams& params);

struct AgentState {
  Vec3 position;
  Vec3 direction;  // unit length
};

/// Everything one step reads and writes.
struct McpmState {
  std::vector<AgentState> agents;
  ScalarField deposit;
  ScalarField trace;            // receives unit mass per agent per step
  ScalarField data_footprint;   // data_deposit splatted once per token
  std::vector<Vec3> spawn_points;
  ScalarField scratch;
};

struct McpmResult {
  ScalarField trace;  // agent density averaged over the final trace_window steps
  ScalarField deposit;
  int steps_run = 0;
  std::vector<double> convergence_series;
};

/// data_deposit splatted trilinearly at every token position. Throws on an empty cloud.
ScalarField splat_data(const PointCloud& cloud, const McpmParams& params);

/// Probability that an agent adopts the probe direction: p1^s / (p0^s + p1^s),
/// and 1/2 when both readings are zero.
double mutation_probability(double p0, double p1, double sharpness);

/// Direction drawn uniformly over the spherical cap of half-angle `half_angle` around `axis`.
Vec3 sample_cone_uniform(const Vec3& axis, double half_angle, Rng& rng);

/// Direction at polar offset `theta` and azimuth `phi` around the unit `axis`.
Vec3 rotate_off_axis(const Vec3& axis, double theta, double phi);

/// Agents spawned at uniformly chosen data points (or uniformly in the cube)
/// with uniform random directions; deposit starts as the data footprint.
McpmState make_initial_state(const PointCloud& cloud, const McpmParams& params, const Rng& rng);

/// One simulation step:
///  1. sense deposit ahead and along one cone sample,
///  2. adopt the sampled direction with mutation_probability,
///  3. advance, respawning agents that leave the cube,
///  4. deposit agent_deposit (and unit trace mass) per agent,
///  5. re-deposit the data footprint,
///  6. decay the deposit and blur it diffusion_passes times.
void mcpm_step(McpmState& state, const McpmParams& params, const Rng& step_rng);

/// Reorders agents by coarse spatial cell for memory locality.
void sort_agents_spatially(McpmState& state, const GridDims& grid);

/// Separable 3x3x3 box blur with clamped borders; `scale` multiplies the result.
void box_blur(ScalarField& field, ScalarField& scratch, float scale, int threads);

/// Runs n_steps from a fresh state and averages agent density over the last
/// trace_window steps. convergence_series[t] is the L1 change of the running
/// windowed trace at step t relative to its total mass.
McpmResult fit_trace(const PointCloud& cloud, const McpmParams& params, const Rng& rng);

/// Last entry of the convergence series; a fit counts as converged below kConvergedBelow.
double convergence_metric(const McpmResult& result);
inline constexpr double kConvergedBelow = 0.01;

}  // namespace filament
