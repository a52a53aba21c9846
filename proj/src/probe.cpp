#include "filament/probe.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "filament/error.hpp"
#include "filament/parallel.hpp"

namespace filament {

std::optional<std::string> validate(const ProbeParams& p) {
  auto fail = [](const std::string& msg) { throw InvariantError("probe parameters: " + msg); };
  if (p.n_probes < 1) fail("n_probes must be >= 1");
  if (p.n_steps < 0) fail("n_steps must be >= 0");
  if (!(p.sense_angle > 0.0 && p.sense_angle < std::numbers::pi / 2)) fail("sense_angle must be in (0, pi/2)");
  if (!(p.sense_distance > 0.0)) fail("sense_distance must be > 0");
  if (!(p.move_distance >= 0.0)) fail("move_distance must be >= 0");
  if (!(p.discovery_radius > 0.0)) fail("discovery_radius must be > 0");
  if (!(p.trace_floor >= 0.0)) fail("trace_floor must be >= 0");
  if (!(p.sharpness > 0.0)) fail("sharpness must be > 0");
  if (p.discovery_radius < kMinDiscoveryRadius || p.discovery_radius > kMaxDiscoveryRadius)
    return "discovery_radius " + std::to_string(p.discovery_radius) +
           " lies outside the recommended [1/400, 1/200] of the domain";
  return std::nullopt;
}

double turn_probability(double p0, double p1, double eps, double sharpness) {
  if (sharpness == 1.0) return (p1 + eps) / (p0 + p1 + 2.0 * eps);
  const double a = std::pow(p0 + eps, sharpness);
  const double b = std::pow(p1 + eps, sharpness);
  return b / (a + b);
}

Vec3 rotate_toward(const Vec3& from, const Vec3& to, double angle) {
  const double theta = angle_between(from, to);
  if (theta < 1e-12) return to;
  const double a = std::min(angle, theta);
  const Vec3 perp = normalized(to - from * dot(from, to));
  return normalized(from * std::cos(a) + perp * std::sin(a));
}

namespace {

struct StepOutcome {
  AgentState next;
  Vec3 travel;  // direction the probe moved in before any reflection
};

StepOutcome advance_probe(const AgentState& agent, const ScalarField& trace, const ProbeParams& params, Rng& rng) {
  const Vec3 dir = agent.direction;
  const double theta = rng.uniform_open() * params.sense_angle;
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Vec3 sensed = rotate_off_axis(dir, theta, phi);

  const double p0 = sample_trilinear(trace, agent.position + dir * params.sense_distance);
  const double p1 = sample_trilinear(trace, agent.position + sensed * params.sense_distance);

  Vec3 heading = dir;
  if (rng.uniform() < turn_probability(p0, p1, params.trace_floor, params.sharpness)) {
    const double random_angle = rng.uniform_open() * params.sense_angle;
    heading = rotate_toward(dir, sensed, random_angle);
  }

  StepOutcome out{{agent.position + heading * params.move_distance, heading}, heading};
  Vec3& p = out.next.position;
  Vec3& d = out.next.direction;
  for (int a = 0; a < 3; ++a) {
    // A single fold suffices: move_distance is far below the cube size.
    if (p[a] < 0.0) {
      p[a] = -p[a];
      d[a] = -d[a];
    } else if (p[a] > 1.0) {
      p[a] = 2.0 - p[a];
      d[a] = -d[a];
    }
  }
  return out;
}

// Token positions bucketed on a uniform grid of cell size >= radius.
class PointIndex {
 public:
  PointIndex(const std::vector<Vec3>& points, double radius) : points_(points), radius_(radius) {
    cells_per_axis_ = std::max(1, std::min(1024, static_cast<int>(1.0 / radius)));
    for (std::size_t i = 0; i < points.size(); ++i) buckets_[key_of(cell_of(points[i]))].push_back(static_cast<TokenId>(i));
  }

  template <typename Visit>
  void for_each_within(const Vec3& p, Visit&& visit) const {
    const auto c = cell_of(p);
    const double r2 = radius_ * radius_;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = buckets_.find(key_of({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == buckets_.end()) continue;
          for (TokenId id : it->second) {
            const Vec3 d = points_[id] - p;
            if (dot(d, d) <= r2) visit(id);
          }
        }
  }

 private:
  std::array<int, 3> cell_of(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) c[a] = static_cast<int>(std::floor(p[a] * cells_per_axis_));
    return c;
  }
  static std::uint64_t key_of(const std::array<int, 3>& c) {
    auto u = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v + (1 << 20))) & 0x1FFFFF; };
    return u(c[0]) | (u(c[1]) << 21) | (u(c[2]) << 42);
  }

  const std::vector<Vec3>& points_;
  double radius_;
  int cells_per_axis_ = 1;
  std::unordered_map<std::uint64_t, std::vector<TokenId>> buckets_;
};

}  // namespace

AgentState probe_step(const AgentState& agent, const ScalarField& trace, const ProbeParams& params, Rng& rng) {
  return advance_probe(agent, trace, params, rng).next;
}

TrajectorySet run_probes(const ScalarField& trace, const Vec3& seed, const ProbeParams& params, const Rng& rng) {
  validate(params);
  TrajectorySet traj;
  traj.seed = seed;
  traj.n_probes = params.n_probes;
  traj.n_steps = params.n_steps;
  const std::size_t len = static_cast<std::size_t>(params.n_steps) + 1;
  traj.points.resize(params.n_probes * len);
  traj.step_directions.resize(params.n_probes * static_cast<std::size_t>(params.n_steps));

  parallel_for(params.n_probes, params.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rng r = rng.split(p);
      AgentState agent{seed, r.unit_vector()};
      Vec3* points = traj.points.data() + p * len;
      Vec3* dirs = traj.step_directions.data() + p * static_cast<std::size_t>(params.n_steps);
      points[0] = seed;
      for (int s = 0; s < params.n_steps; ++s) {
        const StepOutcome out = advance_probe(agent, trace, params, r);
        agent = out.next;
        points[s + 1] = agent.position;
        dirs[s] = out.travel;
      }
    }
  });
  return traj;
}

DiscoveryCounts discover(const TrajectorySet& traj, const PointCloud& cloud, const ProbeParams& params) {
  const std::size_t n = cloud.size();
  DiscoveryCounts out;
  out.counts.assign(n, 0);
  out.normalized.assign(n, 0.0);
  out.excluded.assign(n, false);
  if (n == 0) return out;

  const PointIndex index(cloud.positions, params.discovery_radius);
  index.for_each_within(traj.seed, [&](TokenId id) { out.excluded[id] = true; });

  const int workers = resolve_threads(params.threads);
  std::vector<std::vector<std::uint64_t>> partial(static_cast<std::size_t>(workers));
  std::atomic<int> next_slot{0};
  parallel_for(traj.n_probes, workers, [&](std::size_t begin, std::size_t end) {
    auto& local = partial[static_cast<std::size_t>(next_slot.fetch_add(1))];
    local.assign(n, 0);
    std::vector<TokenId> seen;
    for (std::size_t p = begin; p < end; ++p) {
      const auto line = traj.polyline(p);
      seen.clear();
      for (std::size_t s = 1; s < line.size(); ++s) {
        index.for_each_within(line[s], [&](TokenId id) {
          if (params.counting == CountingMode::per_event)
            ++local[id];
          else
            seen.push_back(id);
        });
      }
      if (params.counting == CountingMode::once_per_agent) {
        std::sort(seen.begin(), seen.end());
        seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
        for (TokenId id : seen) ++local[id];
      }
    }
  });
  // Integer sums: merge order does not affect the result.
  for (const auto& local : partial)
    for (std::size_t i = 0; i < local.size(); ++i) out.counts[i] += local[i];

  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!out.excluded[i]) total += out.counts[i];
  if (total > 0)
    for (std::size_t i = 0; i < n; ++i)
      if (!out.excluded[i]) out.normalized[i] = static_cast<double>(out.counts[i]) / static_cast<double>(total);
  return out;
}

Vec3 snap_to_trace_max(const ScalarField& trace, const Vec3& p, double radius) {
  const GridDims d = trace.dims();
  const double r = std::max(radius, 0.5 * std::sqrt(3.0) * trace.voxel_size());
  const Vec3 g = trace.world_to_grid(p);
  Vec3 best = p;
  float best_value = -1.0f;
  const int reach[3] = {static_cast<int>(std::ceil(r * d.nx)), static_cast<int>(std::ceil(r * d.ny)),
                        static_cast<int>(std::ceil(r * d.nz))};
  const int c[3] = {static_cast<int>(std::lround(g.x)), static_cast<int>(std::lround(g.y)),
                    static_cast<int>(std::lround(g.z))};
  for (int k = std::max(0, c[2] - reach[2]); k <= std::min(d.nz - 1, c[2] + reach[2]); ++k)
    for (int j = std::max(0, c[1] - reach[1]); j <= std::min(d.ny - 1, c[1] + reach[1]); ++j)
      for (int i = std::max(0, c[0] - reach[0]); i <= std::min(d.nx - 1, c[0] + reach[0]); ++i) {
        const Vec3 center = trace.voxel_center(i, j, k);
        if (distance(center, p) > r) continue;
        if (trace.at(i, j, k) > best_value) {
          best_value = trace.at(i, j, k);
          best = center;
        }
      }
  return best;
}

Ranking mcpm_similarity_from(const ScalarField& trace, const PointCloud& cloud, const Vec3& seed,
                             std::optional<TokenId> query, const ProbeParams& params, const Rng& rng, int n_repeats) {
  if (n_repeats < 1) throw InvariantError("mcpm_similarity: n_repeats must be >= 1");
  const Vec3 start =
      params.seed_mode == SeedMode::snap_to_trace_max ? snap_to_trace_max(trace, seed, params.discovery_radius) : seed;

  std::vector<double> score(cloud.size(), 0.0);
  for (int rep = 0; rep < n_repeats; ++rep) {
    const TrajectorySet traj = run_probes(trace, start, params, rng.split(static_cast<std::uint64_t>(rep)));
    const DiscoveryCounts found = discover(traj, cloud, params);
    for (std::size_t i = 0; i < score.size(); ++i) score[i] += found.normalized[i];
  }

  Ranking ranking;
  ranking.query = query;
  ranking.metric = Metric::mcpm;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (score[i] <= 0.0 || (query && *query == i)) continue;
    ranking.entries.push_back({static_cast<TokenId>(i), score[i] / n_repeats});
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(), [](const RankEntry& a, const RankEntry& b) {
    return a.score != b.score ? a.score > b.score : a.token < b.token;
  });
  return ranking;
}

Ranking mcpm_similarity(const ScalarField& trace, const PointCloud& cloud, TokenId query, const ProbeParams& params,
                        const Rng& rng, int n_repeats) {
  if (query >= cloud.size()) throw UnknownTokenError("unknown token id " + std::to_string(query));
  return mcpm_similarity_from(trace, cloud, cloud.positions[query], query, params, rng, n_repeats);
}

}  // namespace filament
